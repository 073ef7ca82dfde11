/** Minimal netpbm (P5/P6, maxval <= 255) reader.
 *
 * The exporter deliberately supports only these uncompressed formats so it
 * needs no native codec dependency and stays byte-deterministic.
 */

export interface GrayImage {
  width: number
  height: number
  /** luminance in [0, 1], row-major */
  gray: Float64Array
}

export class ImageFormatError extends Error {}

function isWhitespace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d
}

/** Read the next whitespace-delimited header token, skipping # comments. */
function nextToken(data: Buffer, pos: number): { token: string; pos: number } {
  while (pos < data.length) {
    if (isWhitespace(data[pos])) {
      pos++
    } else if (data[pos] === 0x23) {
      while (pos < data.length && data[pos] !== 0x0a) pos++
    } else {
      break
    }
  }
  const start = pos
  while (pos < data.length && !isWhitespace(data[pos])) pos++
  if (start === pos) throw new ImageFormatError('truncated netpbm header')
  return { token: data.subarray(start, pos).toString('ascii'), pos }
}

export function decodeNetpbm(data: Buffer): GrayImage {
  let { token: magic, pos } = nextToken(data, 0)
  if (magic !== 'P5' && magic !== 'P6') {
    throw new ImageFormatError(`unsupported image magic ${JSON.stringify(magic)} (need P5/P6)`)
  }
  const w = nextToken(data, pos)
  const h = nextToken(data, w.pos)
  const m = nextToken(data, h.pos)
  const width = Number(w.token)
  const height = Number(h.token)
  const maxval = Number(m.token)
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new ImageFormatError(`bad image dimensions ${w.token}x${h.token}`)
  }
  if (!Number.isInteger(maxval) || maxval < 1 || maxval > 255) {
    throw new ImageFormatError(`unsupported maxval ${m.token} (need 1..255)`)
  }
  pos = m.pos + 1 // single whitespace byte separates header and raster

  const channels = magic === 'P6' ? 3 : 1
  const expected = width * height * channels
  if (data.length - pos < expected) {
    throw new ImageFormatError(
      `raster truncated: need ${expected} bytes, found ${data.length - pos}`,
    )
  }
  const gray = new Float64Array(width * height)
  for (let i = 0; i < width * height; i++) {
    const base = pos + i * channels
    const value =
      channels === 3
        ? 0.299 * data[base] + 0.587 * data[base + 1] + 0.114 * data[base + 2]
        : data[base]
    gray[i] = value / maxval
  }
  return { width, height, gray }
}
