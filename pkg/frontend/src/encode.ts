/**
 * Document and corpus encoding: read corpus JSONL, score each document,
 * write one interchange record per line. Encoding a corpus is resumable:
 * doc_ids already present in the output file are skipped, so an interrupted
 * run picks up where it left off.
 */

import { createReadStream, existsSync } from "node:fs";
import { open } from "node:fs/promises";
import { createInterface } from "node:readline";

import { MlmScorer } from "./backends.js";
import {
  collectNonzero,
  maxInPlace,
  pruneTopS,
  recordLine,
  SparseEntry,
  windowize,
} from "./pipeline.js";

export interface EncoderConfig {
  checkpoint: string;
  maxLen: number;
  batchSize: number;
  topS: number;
  device?: string;
  quantized?: boolean;
}

export const DEFAULT_TOP_S = 3052;
export const DEFAULT_MAX_LEN = 256;
export const DEFAULT_BATCH_SIZE = 32;

export interface CorpusDoc {
  doc_id: string;
  text: string;
}

export async function encodeDocument(
  text: string,
  scorer: MlmScorer,
  config: Pick<EncoderConfig, "maxLen" | "topS">,
): Promise<SparseEntry[]> {
  if (config.topS > scorer.vocabSize) {
    throw new Error(`top-s ${config.topS} exceeds vocabulary size ${scorer.vocabSize}`);
  }
  const tokenIds = await scorer.tokenize(text);
  if (tokenIds.length === 0) return [];
  const windows = windowize(tokenIds, config.maxLen);
  const perWindow = await scorer.scoreWindows(windows);
  const acc = new Float32Array(scorer.vocabSize);
  for (const scores of perWindow) {
    maxInPlace(acc, scores);
  }
  return pruneTopS(collectNonzero(acc), config.topS);
}

async function* readJsonl(path: string): AsyncGenerator<[number, any]> {
  const rl = createInterface({ input: createReadStream(path, "utf-8"), crlfDelay: Infinity });
  let lineno = 0;
  for await (const raw of rl) {
    lineno += 1;
    const line = raw.trim();
    if (!line) continue;
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`${path}: malformed JSON on line ${lineno}: ${err}`);
    }
    yield [lineno, obj];
  }
}

async function existingDocIds(outPath: string): Promise<Set<string>> {
  const ids = new Set<string>();
  if (!existsSync(outPath)) return ids;
  for await (const [lineno, obj] of readJsonl(outPath)) {
    if (typeof obj.doc_id !== "string") {
      throw new Error(`${outPath}: line ${lineno} has no doc_id; refusing to resume`);
    }
    ids.add(obj.doc_id);
  }
  return ids;
}

export interface EncodeResult {
  encoded: number;
  skipped: number;
}

export async function encodeCorpus(
  corpusPath: string,
  outPath: string,
  scorer: MlmScorer,
  config: Pick<EncoderConfig, "maxLen" | "topS">,
  onProgress?: (done: number) => void,
): Promise<EncodeResult> {
  const done = await existingDocIds(outPath);
  const handle = await open(outPath, "a");
  let encoded = 0;
  let skipped = 0;
  try {
    for await (const [lineno, obj] of readJsonl(corpusPath)) {
      if (typeof obj.doc_id !== "string" || typeof obj.text !== "string") {
        throw new Error(`${corpusPath}: line ${lineno} missing doc_id or text`);
      }
      if (done.has(obj.doc_id)) {
        skipped += 1;
        continue;
      }
      const entries = await encodeDocument(obj.text, scorer, config);
      await handle.write(recordLine(obj.doc_id, entries) + "\n");
      done.add(obj.doc_id);
      encoded += 1;
      if (onProgress) onProgress(encoded);
    }
  } finally {
    await handle.close();
  }
  return { encoded, skipped };
}
