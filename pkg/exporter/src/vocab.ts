/** Caption tokenization matching the trainer: lowercase, whitespace split,
 * unknown tokens map to [UNK]; special tokens own ids 0..2. */

export const SPECIAL_TOKENS = ['[PAD]', '[CLS]', '[UNK]'] as const
export const UNK_ID = 2

export function tokenize(caption: string): string[] {
  return caption.toLowerCase().split(/\s+/).filter((token) => token.length > 0)
}

export function buildVocab(captions: string[]): string[] {
  const seen = new Set<string>(SPECIAL_TOKENS)
  const vocab: string[] = [...SPECIAL_TOKENS]
  for (const caption of captions) {
    for (const token of tokenize(caption)) {
      if (!seen.has(token)) {
        seen.add(token)
        vocab.push(token)
      }
    }
  }
  return vocab
}

export function encode(caption: string, index: Map<string, number>): number[] {
  return tokenize(caption).map((token) => index.get(token) ?? UNK_ID)
}
