/**
 * Scoring backends. A backend turns text into token ids and produces, for
 * each token window, the max-aggregated rectified vocabulary scores (max is
 * associative, so per-window aggregation composes with the cross-window
 * aggregation done by the pipeline).
 */

import { spladeActivation } from "./pipeline.js";

export interface MlmScorer {
  readonly vocabSize: number;
  tokenize(text: string): Promise<number[]>;
  /** Per window: vocab-sized array of nonnegative, max-pooled scores. */
  scoreWindows(windows: number[][]): Promise<Float32Array[]>;
}

export interface BackendOptions {
  device?: string;
  quantized?: boolean;
  batchSize?: number;
}

// ---------------------------------------------------------------------------
// Deterministic hash backend ("stub:<vocabSize>") for tests and offline use.
// ---------------------------------------------------------------------------

const GOLDEN = 0x9e3779b97f4a7c15n;
const MASK64 = (1n << 64n) - 1n;

function splitmix64(seed: bigint): bigint {
  let z = (seed + GOLDEN) & MASK64;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  return z ^ (z >> 31n);
}

function hashString(text: string): bigint {
  let h = 0xcbf29ce484222325n;
  for (let i = 0; i < text.length; i++) {
    h = ((h ^ BigInt(text.charCodeAt(i))) * 0x100000001b3n) & MASK64;
  }
  return h;
}

/**
 * Checkpoint-free scorer: every token id spreads deterministic pseudo-random
 * mass over a handful of vocabulary features. Exists so the pipeline, the
 * file contract and the determinism guarantees are testable without
 * downloading a model.
 */
export class HashScorer implements MlmScorer {
  readonly vocabSize: number;
  private readonly featuresPerToken: number;

  constructor(vocabSize = 30522, featuresPerToken = 8) {
    this.vocabSize = vocabSize;
    this.featuresPerToken = featuresPerToken;
  }

  async tokenize(text: string): Promise<number[]> {
    const parts = text
      .toLowerCase()
      .split(/[^\p{L}\p{N}]+/u)
      .filter((t) => t.length > 0);
    return parts.map((t) => Number(hashString(t) % BigInt(this.vocabSize)));
  }

  async scoreWindows(windows: number[][]): Promise<Float32Array[]> {
    return windows.map((window) => {
      const acc = new Float32Array(this.vocabSize);
      for (const tokenId of window) {
        for (let j = 0; j < this.featuresPerToken; j++) {
          const h = splitmix64(BigInt(tokenId) * 64n + BigInt(j));
          const index = Number(h % BigInt(this.vocabSize));
          // raw logit in [-1, 3): some features rectify to zero
          const raw = Number((h >> 16n) % 4000n) / 1000 - 1;
          const weight = spladeActivation(raw);
          if (weight > acc[index]) acc[index] = weight;
        }
      }
      return acc;
    });
  }
}

// ---------------------------------------------------------------------------
// Real checkpoint backend via @xenova/transformers (lazy import).
// ---------------------------------------------------------------------------

/**
 * Masked-language-model scorer over a released checkpoint. Loads lazily so
 * the package works without the optional dependency installed; scores are
 * log1p(relu(logit)) per sequence position, max-pooled over the positions
 * the attention mask keeps (special tokens included, as the checkpoint was
 * trained).
 */
export class TransformersScorer implements MlmScorer {
  readonly vocabSize: number;
  private readonly batchSize: number;

  private constructor(
    private readonly tokenizer: any,
    private readonly model: any,
    private readonly Tensor: any,
    private readonly clsIds: number[],
    private readonly sepIds: number[],
    vocabSize: number,
    batchSize: number,
  ) {
    this.vocabSize = vocabSize;
    this.batchSize = batchSize;
  }

  static async load(checkpoint: string, options: BackendOptions = {}): Promise<TransformersScorer> {
    let transformers: any;
    try {
      // non-literal specifier: the model runtime is an install-on-demand extra
      const moduleName = "@xenova/transformers";
      transformers = await import(moduleName);
    } catch (err) {
      throw new Error(
        "@xenova/transformers is not installed; `npm install @xenova/transformers` " +
          "to use a real checkpoint, or pass a stub:<vocabSize> checkpoint",
      );
    }
    const { AutoTokenizer, AutoModelForMaskedLM, Tensor } = transformers;
    const tokenizer = await AutoTokenizer.from_pretrained(checkpoint);
    const model = await AutoModelForMaskedLM.from_pretrained(checkpoint, {
      quantized: options.quantized ?? false,
    });
    // ids the template wraps around content (e.g. [CLS] ... [SEP])
    const template: number[] = Array.from(await tokenizer.encode(""), Number);
    const probe: number[] = Array.from(await tokenizer.encode("a"), Number);
    const prefixLen = (() => {
      let i = 0;
      while (i < template.length && i < probe.length && template[i] === probe[i]) i++;
      return i;
    })();
    const vocabSize = model.config.vocab_size ?? tokenizer.model?.vocab?.length;
    if (!vocabSize) throw new Error("cannot determine checkpoint vocabulary size");
    return new TransformersScorer(
      tokenizer,
      model,
      Tensor,
      template.slice(0, prefixLen),
      template.slice(prefixLen),
      Number(vocabSize),
      options.batchSize ?? 8,
    );
  }

  async tokenize(text: string): Promise<number[]> {
    const ids = await this.tokenizer.encode(text, null, { add_special_tokens: false });
    return Array.from(ids, Number);
  }

  async scoreWindows(windows: number[][]): Promise<Float32Array[]> {
    const results: Float32Array[] = [];
    for (let start = 0; start < windows.length; start += this.batchSize) {
      const group = windows.slice(start, start + this.batchSize);
      const seqs = group.map((w) => [...this.clsIds, ...w, ...this.sepIds]);
      const maxLen = Math.max(...seqs.map((s) => s.length));
      const ids = new BigInt64Array(group.length * maxLen);
      const mask = new BigInt64Array(group.length * maxLen);
      seqs.forEach((seq, row) => {
        seq.forEach((id, col) => {
          ids[row * maxLen + col] = BigInt(id);
          mask[row * maxLen + col] = 1n;
        });
      });
      const output = await this.model({
        input_ids: new this.Tensor("int64", ids, [group.length, maxLen]),
        attention_mask: new this.Tensor("int64", mask, [group.length, maxLen]),
      });
      const logits: Float32Array = output.logits.data;
      seqs.forEach((seq, row) => {
        const acc = new Float32Array(this.vocabSize);
        for (let pos = 0; pos < seq.length; pos++) {
          const base = (row * maxLen + pos) * this.vocabSize;
          for (let v = 0; v < this.vocabSize; v++) {
            const raw = logits[base + v];
            if (raw > 0) {
              const w = Math.log1p(raw);
              if (w > acc[v]) acc[v] = w;
            }
          }
        }
        results.push(acc);
      });
    }
    return results;
  }
}

const STUB_PREFIX = "stub:";

export const DEFAULT_CHECKPOINT = "naver/splade-cocondenser-ensembledistil";

export async function resolveScorer(
  checkpoint: string,
  options: BackendOptions = {},
): Promise<MlmScorer> {
  if (checkpoint.startsWith(STUB_PREFIX)) {
    const vocab = Number(checkpoint.slice(STUB_PREFIX.length) || "30522");
    if (!Number.isInteger(vocab) || vocab < 1) {
      throw new Error(`bad stub vocab size in ${checkpoint}`);
    }
    return new HashScorer(vocab);
  }
  return TransformersScorer.load(checkpoint, options);
}
