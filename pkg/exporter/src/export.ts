/** Orchestration: images + caption CSV -> dataset manifest/blob pair. */

import { readFileSync, readdirSync } from 'node:fs'
import { basename, extname, join } from 'node:path'

import { CaptionCsvError, CaptionRow, loadCaptions } from './captions.js'
import { DETECTORS, DetectorName, RegionSet, extractRegions } from './detector.js'
import { GrayImage, decodeNetpbm } from './image.js'
import { buildVocab, encode } from './vocab.js'
import { DatasetHeader, ExportedSample, WrittenDataset, writeDataset } from './writer.js'

export interface ExportJob {
  imagesDir: string
  captionsCsv: string
  detector: DetectorName
  k: number
  featureDim: number
  out: string
  /** class-name order; when omitted, the sorted distinct CSV labels */
  classes?: string[]
}

export interface ExportResult extends WrittenDataset {
  samples: number
  skippedRows: number
  classNames: string[]
}

const IMAGE_EXTENSIONS = new Set(['.ppm', '.pgm'])

function listImages(dir: string): Map<string, string> {
  const stems = new Map<string, string>()
  for (const entry of readdirSync(dir).sort()) {
    if (IMAGE_EXTENSIONS.has(extname(entry).toLowerCase())) {
      stems.set(basename(entry, extname(entry)), join(dir, entry))
    }
  }
  return stems
}

function resolveClasses(rows: CaptionRow[], explicit?: string[]): string[] {
  const classes = explicit ?? [...new Set(rows.map((row) => row.label))].sort()
  if (new Set(classes).size !== classes.length) {
    throw new CaptionCsvError(`class names must be unique, got ${classes.join(', ')}`)
  }
  return classes
}

export function runExport(job: ExportJob): ExportResult {
  if (job.k < 1) throw new Error(`k must be >= 1, got ${job.k}`)
  const detector = DETECTORS[job.detector]
  if (!detector) {
    throw new Error(
      `unknown detector ${JSON.stringify(job.detector)}, expected ${Object.keys(DETECTORS).join('/')}`,
    )
  }
  const rows = loadCaptions(job.captionsCsv)
  const classNames = resolveClasses(rows, job.classes)
  const images = listImages(job.imagesDir)

  // decode + detect once per image; unreadable images are skipped with a log line
  const regionCache = new Map<string, RegionSet>()
  const kept: CaptionRow[] = []
  let skippedRows = 0
  for (const row of rows) {
    if (!regionCache.has(row.imageId)) {
      const path = images.get(row.imageId)
      if (!path) {
        console.error(`skipping ${row.imageId}: no image file in ${job.imagesDir}`)
        skippedRows++
        continue
      }
      let image: GrayImage
      try {
        image = decodeNetpbm(readFileSync(path))
      } catch (error) {
        console.error(`skipping ${row.imageId}: ${(error as Error).message}`)
        skippedRows++
        continue
      }
      regionCache.set(row.imageId, extractRegions(image, detector, job.k, job.featureDim))
    }
    kept.push(row)
  }

  const vocab = buildVocab(kept.map((row) => row.caption))
  const index = new Map(vocab.map((token, id) => [token, id]))

  const perImageCounter = new Map<string, number>()
  const samples: ExportedSample[] = kept.map((row) => {
    const labelIndex = classNames.indexOf(row.label)
    if (labelIndex < 0) {
      throw new CaptionCsvError(`label ${JSON.stringify(row.label)} not in class list`)
    }
    if (row.distribution.length !== classNames.length) {
      throw new CaptionCsvError(
        `sample ${row.imageId}: distribution has ${row.distribution.length} entries, ` +
          `expected ${classNames.length} (pass --classes with the full class list ` +
          `when not every class appears as a label)`,
      )
    }
    const ordinal = perImageCounter.get(row.imageId) ?? 0
    perImageCounter.set(row.imageId, ordinal + 1)
    const regions = regionCache.get(row.imageId)!
    return {
      sampleId: `${row.imageId}#${String(ordinal).padStart(3, '0')}`,
      tokens: encode(row.caption, index),
      label: labelIndex,
      distribution: row.distribution,
      split: row.split,
      caption: row.caption,
      paddedRegions: job.k - regions.detected,
      boxes: regions.boxes,
      scores: regions.scores,
      features: regions.features,
    }
  })

  const header: DatasetHeader = {
    numClasses: classNames.length,
    classNames,
    regionFeatureDim: job.featureDim,
    k: job.k,
    vocab,
    provenance: {
      exporter: 'mmfusion-exporter',
      exporter_version: '0.1.0',
      detector: { ...detector },
      feature_dim: job.featureDim,
    },
  }
  const written = writeDataset(job.out, header, samples)
  return { ...written, samples: samples.length, skippedRows, classNames }
}
