#!/usr/bin/env node
/** export --images DIR --captions CSV --detector NAME --k INT --out PREFIX */

import { parseArgs } from 'node:util'

import { DETECTORS, DetectorName } from './detector.js'
import { runExport } from './export.js'

const USAGE = `usage: mmfusion-export export --images DIR --captions CSV \\
    --detector ${Object.keys(DETECTORS).join('|')} --k INT --out PREFIX \\
    [--dim INT] [--classes a,b,c]

Converts netpbm images plus a caption CSV (image_id, caption, label,
distribution[, split]) into a dataset manifest/blob pair the trainer loads.`

function fail(message: string): never {
  console.error(`error: ${message}`)
  console.error(USAGE)
  process.exit(1)
}

export function main(argv: string[]): number {
  if (argv[0] === '--help' || argv[0] === '-h') {
    console.log(USAGE)
    return 0
  }
  if (argv[0] !== 'export') {
    fail(`unknown command ${JSON.stringify(argv[0] ?? '')}`)
  }
  let values
  try {
    values = parseArgs({
      args: argv.slice(1),
      options: {
        images: { type: 'string' },
        captions: { type: 'string' },
        detector: { type: 'string' },
        k: { type: 'string' },
        out: { type: 'string' },
        dim: { type: 'string', default: '16' },
        classes: { type: 'string' },
      },
    }).values
  } catch (error) {
    fail((error as Error).message)
  }
  for (const flag of ['images', 'captions', 'detector', 'k', 'out'] as const) {
    if (!values[flag]) fail(`--${flag} is required`)
  }
  const k = Number(values.k)
  const dim = Number(values.dim)
  if (!Number.isInteger(k) || k < 1) fail(`--k must be a positive integer, got ${values.k}`)
  if (!Number.isInteger(dim) || dim < 1) fail(`--dim must be a positive integer, got ${values.dim}`)
  if (!(values.detector! in DETECTORS)) {
    fail(`--detector must be one of ${Object.keys(DETECTORS).join(', ')}`)
  }

  try {
    const result = runExport({
      imagesDir: values.images!,
      captionsCsv: values.captions!,
      detector: values.detector as DetectorName,
      k,
      featureDim: dim,
      out: values.out!,
      classes: values.classes ? values.classes.split(',').map((name) => name.trim()) : undefined,
    })
    console.log(
      `wrote ${result.samples} samples (${result.classNames.length} classes, ` +
        `${result.skippedRows} rows skipped) to ${result.manifestPath} / ${result.blobPath}`,
    )
    return 0
  } catch (error) {
    console.error(`error: ${(error as Error).message}`)
    return 1
  }
}

process.exit(main(process.argv.slice(2)))
