/** Writers for the trainer's dataset pair.
 *
 * Manifest: JSONL with a header object, one record per sample, and a footer
 * carrying the sample count and the sha256 of the feature blob.
 * Blob: magic MMRF, little-endian u16 version, then per sample u32 id
 * length + id, u32 k, u32 dim, float32 boxes [k,4], scores [k] and
 * features [k,dim].
 */

import { createHash } from 'node:crypto'
import { writeFileSync } from 'node:fs'

export const MANIFEST_FORMAT = 'mmfusion-dataset'
export const MANIFEST_VERSION = 1
export const BLOB_MAGIC = 'MMRF'
export const BLOB_VERSION = 1

export interface ExportedSample {
  sampleId: string
  tokens: number[]
  label: number
  distribution: number[]
  split: string
  caption: string
  paddedRegions: number
  boxes: number[][]
  scores: number[]
  features: Float64Array
}

export interface DatasetHeader {
  numClasses: number
  classNames: string[]
  regionFeatureDim: number
  k: number
  vocab: string[]
  provenance: Record<string, unknown>
}

export function buildBlob(samples: ExportedSample[], k: number, dim: number): Buffer {
  let size = 6
  const ids = samples.map((sample) => Buffer.from(sample.sampleId, 'utf-8'))
  for (const id of ids) {
    size += 4 + id.length + 8 + k * 4 * 4 + k * 4 + k * dim * 4
  }
  const blob = Buffer.alloc(size)
  blob.write(BLOB_MAGIC, 0, 'ascii')
  blob.writeUInt16LE(BLOB_VERSION, 4)
  let pos = 6
  samples.forEach((sample, index) => {
    const id = ids[index]
    pos = blob.writeUInt32LE(id.length, pos)
    pos += id.copy(blob, pos)
    pos = blob.writeUInt32LE(k, pos)
    pos = blob.writeUInt32LE(dim, pos)
    for (const box of sample.boxes) {
      for (const value of box) pos = blob.writeFloatLE(value, pos)
    }
    for (const score of sample.scores) pos = blob.writeFloatLE(score, pos)
    for (const value of sample.features) pos = blob.writeFloatLE(value, pos)
  })
  return blob
}

export function buildManifest(
  header: DatasetHeader,
  samples: ExportedSample[],
  blobSha256: string,
): string {
  const lines: string[] = []
  lines.push(
    JSON.stringify({
      format: MANIFEST_FORMAT,
      version: MANIFEST_VERSION,
      num_classes: header.numClasses,
      class_names: header.classNames,
      region_feature_dim: header.regionFeatureDim,
      k: header.k,
      vocab: header.vocab,
      provenance: header.provenance,
    }),
  )
  for (const sample of samples) {
    const record: Record<string, unknown> = {
      sample_id: sample.sampleId,
      tokens: sample.tokens,
      label: sample.label,
      distribution: sample.distribution,
      split: sample.split,
      caption: sample.caption,
    }
    if (sample.paddedRegions > 0) {
      record.padded_regions = sample.paddedRegions
    }
    lines.push(JSON.stringify(record))
  }
  lines.push(JSON.stringify({ footer: true, n_samples: samples.length, blob_sha256: blobSha256 }))
  return lines.join('\n') + '\n'
}

export interface WrittenDataset {
  manifestPath: string
  blobPath: string
}

export function writeDataset(
  prefix: string,
  header: DatasetHeader,
  samples: ExportedSample[],
): WrittenDataset {
  const blob = buildBlob(samples, header.k, header.regionFeatureDim)
  const sha = createHash('sha256').update(blob).digest('hex')
  const manifest = buildManifest(header, samples, sha)
  const manifestPath = `${prefix}.manifest.jsonl`
  const blobPath = `${prefix}.features.bin`
  writeFileSync(blobPath, blob)
  writeFileSync(manifestPath, manifest, 'utf-8')
  return { manifestPath, blobPath }
}
