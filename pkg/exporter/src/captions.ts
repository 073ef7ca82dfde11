/** Sidecar caption CSV: image_id, caption, label, distribution[, split].
 *
 * The distribution column holds space-separated annotator vote shares over
 * the class list; rows are normalized to sum exactly 1.
 */

import { readFileSync } from 'node:fs'
import Papa from 'papaparse'

export const SPLITS = ['train', 'val', 'test'] as const

export interface CaptionRow {
  imageId: string
  caption: string
  label: string
  distribution: number[]
  split: string
}

export class CaptionCsvError extends Error {}

export function loadCaptions(path: string): CaptionRow[] {
  const parsed = Papa.parse<Record<string, string>>(readFileSync(path, 'utf-8'), {
    header: true,
    skipEmptyLines: true,
  })
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]
    throw new CaptionCsvError(`cannot parse ${path}: ${first.message} (row ${first.row})`)
  }
  const rows: CaptionRow[] = []
  parsed.data.forEach((record, index) => {
    for (const column of ['image_id', 'caption', 'label', 'distribution']) {
      if (!record[column] || !record[column].trim()) {
        throw new CaptionCsvError(`row ${index + 1}: missing column ${column}`)
      }
    }
    const shares = record.distribution.trim().split(/\s+/).map(Number)
    if (shares.some((value) => !Number.isFinite(value) || value < 0)) {
      throw new CaptionCsvError(`row ${index + 1}: distribution must be nonnegative numbers`)
    }
    const total = shares.reduce((acc, value) => acc + value, 0)
    if (total <= 0) {
      throw new CaptionCsvError(`row ${index + 1}: distribution sums to zero`)
    }
    const split = record.split?.trim() || 'test'
    if (!SPLITS.includes(split as (typeof SPLITS)[number])) {
      throw new CaptionCsvError(`row ${index + 1}: unknown split ${JSON.stringify(split)}`)
    }
    rows.push({
      imageId: record.image_id.trim(),
      caption: record.caption,
      label: record.label.trim(),
      distribution: shares.map((value) => value / total),
      split,
    })
  })
  return rows
}
