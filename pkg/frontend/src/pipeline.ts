/**
 * Pure pieces of the encoding pipeline: token windowing, max-aggregation of
 * vocabulary scores, top-s pruning and the interchange record format.
 */

export type SparseEntry = [index: number, weight: number];

/** Split token ids into fixed-size windows; stride equals the window size. */
export function windowize(tokenIds: number[], maxLen: number): number[][] {
  if (maxLen < 1) throw new Error(`maxLen must be >= 1, got ${maxLen}`);
  const windows: number[][] = [];
  for (let start = 0; start < tokenIds.length; start += maxLen) {
    windows.push(tokenIds.slice(start, start + maxLen));
  }
  return windows;
}

/** Elementwise maximum of `scores` into `acc` (both vocab-sized). */
export function maxInPlace(acc: Float32Array, scores: Float32Array): void {
  if (acc.length !== scores.length) {
    throw new Error(`vocab size mismatch: ${acc.length} vs ${scores.length}`);
  }
  for (let i = 0; i < acc.length; i++) {
    if (scores[i] > acc[i]) acc[i] = scores[i];
  }
}

/** Nonzero (index, weight) pairs of a dense vocabulary vector, by index. */
export function collectNonzero(dense: Float32Array): SparseEntry[] {
  const entries: SparseEntry[] = [];
  for (let i = 0; i < dense.length; i++) {
    if (dense[i] > 0) entries.push([i, dense[i]]);
  }
  return entries;
}

/**
 * Keep the s highest-weight entries, ties broken by lower feature index;
 * result sorted by feature index. Mirrors the consumer's pruning semantics.
 */
export function pruneTopS(entries: SparseEntry[], s: number): SparseEntry[] {
  if (s < 1) throw new Error(`top-s must be >= 1, got ${s}`);
  if (entries.length <= s) {
    return [...entries].sort((a, b) => a[0] - b[0]);
  }
  const ranked = [...entries].sort((a, b) => (b[1] - a[1]) || (a[0] - b[0]));
  return ranked.slice(0, s).sort((a, b) => a[0] - b[0]);
}

/** One interchange JSONL line: {"doc_id": ..., "vector": {index: weight}}. */
export function recordLine(docId: string, entries: SparseEntry[]): string {
  const vector: Record<string, number> = {};
  for (const [index, weight] of entries) {
    vector[String(index)] = weight;
  }
  return JSON.stringify({ doc_id: docId, vector });
}

/** The log-saturated rectification applied to raw MLM logits. */
export function spladeActivation(logit: number): number {
  return logit > 0 ? Math.log1p(logit) : 0;
}
