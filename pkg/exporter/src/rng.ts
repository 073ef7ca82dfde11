/** Deterministic PRNG so exported feature bytes never depend on the run. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

/** Projection weights in row-major order, values in [-bound, bound]. */
export function seededMatrix(rows: number, cols: number, seed: number): Float64Array {
  const rand = mulberry32(seed)
  const bound = Math.sqrt(6 / (rows + cols))
  const out = new Float64Array(rows * cols)
  for (let i = 0; i < out.length; i++) {
    out[i] = (rand() * 2 - 1) * bound
  }
  return out
}
