import { createHash } from 'node:crypto'
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { spawnSync } from 'node:child_process'
import { dirname, join } from 'node:path'
import { fileURLToPath } from 'node:url'

import { describe, expect, it } from 'vitest'

import { DETECTORS, extractRegions, nonMaxSuppression, proposeRegions } from '../src/detector.js'
import { runExport } from '../src/export.js'
import { decodeNetpbm } from '../src/image.js'
import { buildVocab, encode } from '../src/vocab.js'

const here = dirname(fileURLToPath(import.meta.url))
const FIXTURES = join(here, '..', 'fixtures')
const IMAGES = join(FIXTURES, 'images')
const CAPTIONS = join(FIXTURES, 'captions.csv')
const CLASSES =
  'amusement,awe,contentment,excitement,anger,disgust,fear,sadness,something-else'

function tmp(): string {
  return mkdtempSync(join(tmpdir(), 'exporter-'))
}

function digest(path: string): string {
  return createHash('sha256').update(readFileSync(path)).digest('hex')
}

function exportFixtures(out: string, detector: 'bottom-up' | 'vinvl-style' = 'bottom-up') {
  return runExport({
    imagesDir: IMAGES,
    captionsCsv: CAPTIONS,
    detector,
    k: 4,
    featureDim: 16,
    out,
    classes: CLASSES.split(','),
  })
}

function readManifest(prefix: string) {
  const lines = readFileSync(`${prefix}.manifest.jsonl`, 'utf-8')
    .split('\n')
    .filter((line) => line.trim().length > 0)
  return {
    header: JSON.parse(lines[0]),
    records: lines.slice(1, -1).map((line) => JSON.parse(line)),
    footer: JSON.parse(lines[lines.length - 1]),
  }
}

function flatPgm(width: number, height: number, value = 128): Buffer {
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, 'ascii')
  return Buffer.concat([header, Buffer.alloc(width * height, value)])
}

function validateWithTrainer(prefix: string) {
  return spawnSync('python3', ['-m', 'mmfusion.cli', 'validate', '--data', prefix], {
    encoding: 'utf-8',
  })
}

describe('netpbm decoding', () => {
  it('reads binary rgb with comments', () => {
    const data = Buffer.concat([
      Buffer.from('P6\n# a comment\n2 1\n255\n', 'ascii'),
      Buffer.from([255, 0, 0, 0, 0, 255]),
    ])
    const image = decodeNetpbm(data)
    expect(image.width).toBe(2)
    expect(image.height).toBe(1)
    expect(image.gray[0]).toBeCloseTo(0.299, 6)
    expect(image.gray[1]).toBeCloseTo(0.114, 6)
  })

  it('rejects wrong magic and truncated rasters', () => {
    expect(() => decodeNetpbm(Buffer.from('P3\n1 1\n255\n1 2 3\n'))).toThrow(/magic/)
    expect(() => decodeNetpbm(flatPgm(8, 8).subarray(0, 20))).toThrow(/truncated/)
  })
})

describe('detector', () => {
  it('suppresses overlapping proposals', () => {
    const mk = (box: [number, number, number, number], score: number) => ({
      box,
      score,
      stats: new Float64Array(10),
    })
    const regions = [
      mk([0.0, 0.0, 0.5, 0.5], 1.0),
      mk([0.05, 0.0, 0.55, 0.5], 0.9), // IoU 0.82 with the winner: dropped
      mk([0.6, 0.6, 0.9, 0.9], 0.8),
    ]
    const kept = nonMaxSuppression(regions, 0.5)
    expect(kept.map((r) => r.score)).toEqual([1.0, 0.8])
  })

  it('dense grids lose proposals to suppression on real images', () => {
    const image = decodeNetpbm(readFileSync(join(IMAGES, 'art_a.ppm')))
    const proposals = proposeRegions(image, DETECTORS['vinvl-style'])
    const kept = nonMaxSuppression(proposals, DETECTORS['vinvl-style'].iouThreshold)
    expect(kept.length).toBeGreaterThan(0)
    expect(kept.length).toBeLessThan(proposals.length)
    for (let i = 1; i < kept.length; i++) {
      expect(kept[i].score).toBeLessThanOrEqual(kept[i - 1].score)
    }
  })

  it('returns top-k normalized regions with valid geometry', () => {
    const image = decodeNetpbm(readFileSync(join(IMAGES, 'art_b.ppm')))
    const regions = extractRegions(image, DETECTORS['bottom-up'], 4, 16)
    expect(regions.detected).toBe(4)
    expect(regions.scores[0]).toBe(1)
    for (let i = 0; i < 4; i++) {
      if (i > 0) expect(regions.scores[i]).toBeLessThanOrEqual(regions.scores[i - 1])
      for (const value of regions.boxes[i]) {
        expect(value).toBeGreaterThanOrEqual(0)
        expect(value).toBeLessThanOrEqual(1)
      }
    }
  })

  it('appends box geometry for the fine-grained detector', () => {
    const image = decodeNetpbm(readFileSync(join(IMAGES, 'art_c.ppm')))
    const regions = extractRegions(image, DETECTORS['vinvl-style'], 2, 16)
    const [x1, y1, x2, y2] = regions.boxes[0]
    const tail = Array.from(regions.features.slice(10, 16))
    expect(tail[0]).toBeCloseTo((x1 + x2) / 2, 10)
    expect(tail[1]).toBeCloseTo((y1 + y2) / 2, 10)
    expect(tail[2]).toBeCloseTo(x2 - x1, 10)
    expect(tail[3]).toBeCloseTo(y2 - y1, 10)
    expect(tail[5]).toBeCloseTo(regions.scores[0], 10)
  })

  it('zero-pads when the image has fewer regions than k', () => {
    const image = decodeNetpbm(flatPgm(64, 48))
    const regions = extractRegions(image, DETECTORS['bottom-up'], 4, 16)
    expect(regions.detected).toBe(0)
    expect(regions.scores).toEqual([0, 0, 0, 0])
    expect(regions.boxes[3]).toEqual([0, 0, 0, 0])
    expect(Array.from(regions.features)).toEqual(new Array(64).fill(0))
  })
})

describe('vocabulary', () => {
  it('pins the special tokens and assigns dense ids', () => {
    const vocab = buildVocab(['Bright RING of light', 'ring of fire'])
    expect(vocab.slice(0, 3)).toEqual(['[PAD]', '[CLS]', '[UNK]'])
    expect(new Set(vocab).size).toBe(vocab.length)
    const index = new Map(vocab.map((token, id) => [token, id]))
    expect(encode('ring of nothing', index)).toEqual([
      index.get('ring'),
      index.get('of'),
      2, // unseen word maps to [UNK]
    ])
  })
})

describe('fixture export', () => {
  it('writes a structurally valid dataset pair', () => {
    const prefix = join(tmp(), 'art')
    const result = exportFixtures(prefix)
    expect(result.samples).toBe(5)
    expect(result.skippedRows).toBe(0)

    const { header, records, footer } = readManifest(prefix)
    expect(header.format).toBe('mmfusion-dataset')
    expect(header.version).toBe(1)
    expect(header.num_classes).toBe(9)
    expect(header.k).toBe(4)
    expect(header.region_feature_dim).toBe(16)
    expect(header.vocab.slice(0, 3)).toEqual(['[PAD]', '[CLS]', '[UNK]'])
    expect(header.provenance.detector.name).toBe('bottom-up')
    expect(footer.n_samples).toBe(5)

    const blob = readFileSync(`${prefix}.features.bin`)
    expect(blob.subarray(0, 4).toString('ascii')).toBe('MMRF')
    expect(blob.readUInt16LE(4)).toBe(1)
    expect(footer.blob_sha256).toBe(createHash('sha256').update(blob).digest('hex'))

    // caption-level samples: two captions of the same image are two samples
    expect(records[0].sample_id).toBe('art_a#000')
    expect(records[1].sample_id).toBe('art_a#001')
    for (const record of records) {
      const total = record.distribution.reduce((acc: number, v: number) => acc + v, 0)
      expect(Math.abs(total - 1)).toBeLessThan(1e-9)
      expect(Math.max(...record.tokens)).toBeLessThan(header.vocab.length)
    }
    // commas inside quoted captions survive the CSV round trip
    expect(records[0].caption).toContain('playful, almost dancing')
  })

  it('re-export is byte-identical', () => {
    const a = join(tmp(), 'a')
    const b = join(tmp(), 'b')
    exportFixtures(a)
    exportFixtures(b)
    expect(digest(`${a}.manifest.jsonl`)).toBe(digest(`${b}.manifest.jsonl`))
    expect(digest(`${a}.features.bin`)).toBe(digest(`${b}.features.bin`))
  })

  it('exports zero images into a valid empty dataset', () => {
    const dir = tmp()
    const csv = join(dir, 'empty.csv')
    writeFileSync(csv, 'image_id,caption,label,distribution\n')
    const prefix = join(dir, 'empty')
    const result = runExport({
      imagesDir: IMAGES,
      captionsCsv: csv,
      detector: 'bottom-up',
      k: 4,
      featureDim: 16,
      out: prefix,
      classes: CLASSES.split(','),
    })
    expect(result.samples).toBe(0)
    const { records, footer } = readManifest(prefix)
    expect(records).toEqual([])
    expect(footer.n_samples).toBe(0)
    expect(readFileSync(`${prefix}.features.bin`).length).toBe(6)
    expect(validateWithTrainer(prefix).status).toBe(0)
  })

  it('skips rows whose image is missing or unreadable, with a log line', () => {
    const dir = tmp()
    const csv = join(dir, 'partial.csv')
    writeFileSync(
      csv,
      'image_id,caption,label,distribution\n' +
        'art_a,fine art,awe,1 0 0 0 0 0 0 0 0\n' +
        'ghost,missing art,awe,1 0 0 0 0 0 0 0 0\n',
    )
    const result = runExport({
      imagesDir: IMAGES,
      captionsCsv: csv,
      detector: 'bottom-up',
      k: 4,
      featureDim: 16,
      out: join(dir, 'partial'),
      classes: CLASSES.split(','),
    })
    expect(result.samples).toBe(1)
    expect(result.skippedRows).toBe(1)
  })

  it('flags padded regions for featureless images', () => {
    const dir = tmp()
    writeFileSync(join(dir, 'flat.ppm'), flatPgm(64, 48))
    const csv = join(dir, 'flat.csv')
    writeFileSync(csv, 'image_id,caption,label,distribution\nflat,a void,awe,1 0 0 0 0 0 0 0 0\n')
    const prefix = join(dir, 'flat')
    runExport({
      imagesDir: dir,
      captionsCsv: csv,
      detector: 'bottom-up',
      k: 4,
      featureDim: 16,
      out: prefix,
      classes: CLASSES.split(','),
    })
    const { records } = readManifest(prefix)
    expect(records[0].padded_regions).toBe(4)
  })

  it('rejects bad caption rows', () => {
    const dir = tmp()
    const bad = (content: string) => {
      const csv = join(dir, `bad-${Math.random()}.csv`)
      writeFileSync(csv, content)
      return () =>
        runExport({
          imagesDir: IMAGES,
          captionsCsv: csv,
          detector: 'bottom-up',
          k: 4,
          featureDim: 16,
          out: join(dir, 'bad'),
          classes: CLASSES.split(','),
        })
    }
    expect(bad('image_id,caption,label\nart_a,hi,awe\n')).toThrow(/distribution/)
    expect(bad('image_id,caption,label,distribution\nart_a,hi,awe,0 0 0 0 0 0 0 0 0\n')).toThrow(
      /zero/,
    )
    expect(
      bad('image_id,caption,label,distribution,split\nart_a,hi,awe,1 0 0 0 0 0 0 0 0,later\n'),
    ).toThrow(/split/)
    expect(bad('image_id,caption,label,distribution\nart_a,hi,boredom,1 0 0 0 0 0 0 0 0\n')).toThrow(
      /not in class list/,
    )
    expect(bad('image_id,caption,label,distribution\nart_a,hi,awe,1 0 0\n')).toThrow(/entries/)
  })
})

describe('trainer contract', () => {
  it('exported fixture files load through the trainer with zero validation errors', () => {
    const prefix = join(tmp(), 'contract')
    exportFixtures(prefix)
    const result = validateWithTrainer(prefix)
    expect(result.error).toBeUndefined()
    expect(result.status, result.stderr).toBe(0)
    expect(result.stdout).toContain('ok: 5 samples')
  })

  it('the fine-grained detector output also passes trainer validation', () => {
    const prefix = join(tmp(), 'contract-vinvl')
    exportFixtures(prefix, 'vinvl-style')
    const result = validateWithTrainer(prefix)
    expect(result.status, result.stderr).toBe(0)
  })
})
