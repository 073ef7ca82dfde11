/** Deterministic region detector.
 *
 * Proposals are a multi-scale box grid scored by mean Sobel edge energy,
 * pruned with IoU non-max suppression; each kept box is summarized by
 * pooled pixel statistics pushed through a seeded linear projection (the
 * "weights" ship with the code via the seed, so the same image always
 * yields the same feature bytes).  Two presets mirror a coarse and a fine
 * detector; the fine one appends normalized box geometry to the features.
 */

import { GrayImage } from './image.js'
import { seededMatrix } from './rng.js'

export type DetectorName = 'bottom-up' | 'vinvl-style'

export interface DetectorConfig {
  name: DetectorName
  /** box side length as a fraction of min(width, height) */
  scales: number[]
  /** grid stride as a fraction of the box side */
  strideFraction: number
  iouThreshold: number
  /** proposals with mean edge energy at or below this are discarded */
  energyFloor: number
  projectionSeed: number
  appendGeometry: boolean
}

export const DETECTORS: Record<DetectorName, DetectorConfig> = {
  'bottom-up': {
    name: 'bottom-up',
    scales: [0.6, 0.4, 0.25],
    strideFraction: 0.5,
    iouThreshold: 0.5,
    energyFloor: 1e-3,
    projectionSeed: 0x5eed0001,
    appendGeometry: false,
  },
  'vinvl-style': {
    name: 'vinvl-style',
    scales: [0.6, 0.4, 0.25, 0.15],
    strideFraction: 0.34,
    iouThreshold: 0.45,
    energyFloor: 1e-3,
    projectionSeed: 0x5eed0002,
    appendGeometry: true,
  },
}

const STATS_DIM = 10

export interface DetectedRegion {
  /** normalized corners [x1, y1, x2, y2] in [0, 1] */
  box: [number, number, number, number]
  score: number
  stats: Float64Array
}

export interface RegionSet {
  /** [k][4], zero rows beyond `detected` */
  boxes: number[][]
  /** [k], non-increasing, zero beyond `detected` */
  scores: number[]
  /** [k * dim] row-major, zero rows beyond `detected` */
  features: Float64Array
  detected: number
}

/** Sobel gradient magnitude; border pixels get zero. */
export function edgeEnergy(image: GrayImage): Float64Array {
  const { width: w, height: h, gray } = image
  const out = new Float64Array(w * h)
  for (let y = 1; y < h - 1; y++) {
    for (let x = 1; x < w - 1; x++) {
      const i = y * w + x
      const gx =
        gray[i - w + 1] + 2 * gray[i + 1] + gray[i + w + 1] -
        (gray[i - w - 1] + 2 * gray[i - 1] + gray[i + w - 1])
      const gy =
        gray[i + w - 1] + 2 * gray[i + w] + gray[i + w + 1] -
        (gray[i - w - 1] + 2 * gray[i - w] + gray[i - w + 1])
      out[i] = Math.sqrt(gx * gx + gy * gy)
    }
  }
  return out
}

/** Summed-area table over row-major values. */
class Integral {
  private table: Float64Array
  constructor(values: Float64Array, private width: number, height: number) {
    this.table = new Float64Array((width + 1) * (height + 1))
    for (let y = 0; y < height; y++) {
      let rowSum = 0
      for (let x = 0; x < width; x++) {
        rowSum += values[y * width + x]
        this.table[(y + 1) * (width + 1) + (x + 1)] =
          this.table[y * (width + 1) + (x + 1)] + rowSum
      }
    }
  }

  /** sum over pixels [x1, x2) x [y1, y2) */
  sum(x1: number, y1: number, x2: number, y2: number): number {
    const w = this.width + 1
    return (
      this.table[y2 * w + x2] - this.table[y1 * w + x2] -
      this.table[y2 * w + x1] + this.table[y1 * w + x1]
    )
  }
}

function iou(a: [number, number, number, number], b: [number, number, number, number]): number {
  const ix = Math.max(0, Math.min(a[2], b[2]) - Math.max(a[0], b[0]))
  const iy = Math.max(0, Math.min(a[3], b[3]) - Math.max(a[1], b[1]))
  const inter = ix * iy
  const union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
  return union > 0 ? inter / union : 0
}

export function proposeRegions(image: GrayImage, config: DetectorConfig): DetectedRegion[] {
  const { width: w, height: h } = image
  const energy = edgeEnergy(image)
  const energyInt = new Integral(energy, w, h)
  const grayInt = new Integral(image.gray, w, h)
  const graySq = new Float64Array(image.gray.length)
  for (let i = 0; i < graySq.length; i++) graySq[i] = image.gray[i] * image.gray[i]
  const graySqInt = new Integral(graySq, w, h)

  let totalEnergy = 0
  for (let i = 0; i < energy.length; i++) totalEnergy += energy[i]
  const imageMeanEnergy = totalEnergy / energy.length

  const proposals: DetectedRegion[] = []
  const base = Math.min(w, h)
  for (const scale of config.scales) {
    const side = Math.max(4, Math.round(base * scale))
    const stride = Math.max(1, Math.round(side * config.strideFraction))
    for (let y = 0; y + side <= h; y += stride) {
      for (let x = 0; x + side <= w; x += stride) {
        const area = side * side
        const meanEnergy = energyInt.sum(x, y, x + side, y + side) / area
        if (meanEnergy <= config.energyFloor) continue
        const meanGray = grayInt.sum(x, y, x + side, y + side) / area
        const varGray = Math.max(
          0,
          graySqInt.sum(x, y, x + side, y + side) / area - meanGray * meanGray,
        )
        const box: [number, number, number, number] = [x / w, y / h, (x + side) / w, (y + side) / h]
        const bw = box[2] - box[0]
        const bh = box[3] - box[1]
        const stats = Float64Array.from([
          meanGray,
          Math.sqrt(varGray),
          meanEnergy,
          (box[0] + box[2]) / 2,
          (box[1] + box[3]) / 2,
          bw,
          bh,
          bw / (bw + bh),
          bw * bh,
          imageMeanEnergy > 0 ? Math.min(4, meanEnergy / imageMeanEnergy) : 0,
        ])
        proposals.push({ box, score: meanEnergy, stats })
      }
    }
  }
  return proposals
}

function orderRegions(regions: DetectedRegion[]): DetectedRegion[] {
  // deterministic: score descending, box coordinates break exact ties
  return [...regions].sort((a, b) => {
    if (a.score !== b.score) return b.score - a.score
    for (let i = 0; i < 4; i++) {
      if (a.box[i] !== b.box[i]) return a.box[i] - b.box[i]
    }
    return 0
  })
}

export function nonMaxSuppression(
  regions: DetectedRegion[],
  threshold: number,
): DetectedRegion[] {
  const kept: DetectedRegion[] = []
  for (const candidate of orderRegions(regions)) {
    if (kept.every((existing) => iou(existing.box, candidate.box) <= threshold)) {
      kept.push(candidate)
    }
  }
  return kept
}

/** Full pipeline: propose, suppress, keep top-k, project features.
 *
 * Fewer detections than k yields zero-padded rows with score 0 (the caller
 * records the padding count in the manifest).
 */
export function extractRegions(
  image: GrayImage,
  config: DetectorConfig,
  k: number,
  dim: number,
): RegionSet {
  if (k < 1) throw new Error(`k must be >= 1, got ${k}`)
  const geometryDims = config.appendGeometry ? 6 : 0
  if (dim <= geometryDims) {
    throw new Error(`feature dim ${dim} too small for detector ${config.name}`)
  }
  const kept = nonMaxSuppression(proposeRegions(image, config), config.iouThreshold).slice(0, k)
  const maxScore = kept.length ? kept[0].score : 0

  const projection = seededMatrix(dim, STATS_DIM, config.projectionSeed)
  const boxes: number[][] = []
  const scores: number[] = []
  const features = new Float64Array(k * dim)
  for (let i = 0; i < k; i++) {
    if (i >= kept.length) {
      boxes.push([0, 0, 0, 0])
      scores.push(0)
      continue
    }
    const region = kept[i]
    boxes.push([...region.box])
    scores.push(region.score / maxScore)
    const projected = dim - geometryDims
    for (let r = 0; r < projected; r++) {
      let acc = 0
      for (let c = 0; c < STATS_DIM; c++) {
        acc += projection[r * STATS_DIM + c] * region.stats[c]
      }
      features[i * dim + r] = Math.tanh(acc)
    }
    if (config.appendGeometry) {
      const [x1, y1, x2, y2] = region.box
      const geometry = [(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1, (x2 - x1) * (y2 - y1), scores[i]]
      for (let g = 0; g < geometryDims; g++) {
        features[i * dim + projected + g] = geometry[g]
      }
    }
  }
  return { boxes, scores, features, detected: kept.length }
}
