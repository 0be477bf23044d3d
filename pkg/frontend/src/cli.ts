#!/usr/bin/env node
/**
 * CLI: `tarsim-encoder encode --corpus <path> --out <path>
 *       [--checkpoint <id>] [--top-s 3052] [--max-len 256] [--batch 32]
 *       [--device cpu] [--quantized]`
 *
 * Writes the sparse-vector interchange JSONL the simulation engine loads.
 * `--checkpoint stub:<vocabSize>` selects the deterministic hash backend
 * (no model download), useful for tests and plumbing checks.
 */

import { parseArgs } from "node:util";

import { DEFAULT_CHECKPOINT, resolveScorer } from "./backends.js";
import { DEFAULT_BATCH_SIZE, DEFAULT_MAX_LEN, DEFAULT_TOP_S, encodeCorpus } from "./encode.js";

function usage(): string {
  return (
    "usage: tarsim-encoder encode --corpus <path> --out <path> " +
    `[--checkpoint <id>] [--top-s ${DEFAULT_TOP_S}] [--max-len ${DEFAULT_MAX_LEN}] ` +
    `[--batch ${DEFAULT_BATCH_SIZE}] [--device cpu] [--quantized]`
  );
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  if (command !== "encode") {
    console.error(usage());
    return 2;
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: rest,
      options: {
        corpus: { type: "string" },
        out: { type: "string" },
        checkpoint: { type: "string", default: DEFAULT_CHECKPOINT },
        "top-s": { type: "string", default: String(DEFAULT_TOP_S) },
        "max-len": { type: "string", default: String(DEFAULT_MAX_LEN) },
        batch: { type: "string", default: String(DEFAULT_BATCH_SIZE) },
        device: { type: "string", default: "cpu" },
        quantized: { type: "boolean", default: false },
      },
    });
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    console.error(usage());
    return 2;
  }
  const values = parsed.values;
  if (!values.corpus || !values.out) {
    console.error(usage());
    return 2;
  }
  const topS = Number(values["top-s"]);
  const maxLen = Number(values["max-len"]);
  const batchSize = Number(values.batch);
  for (const [name, value] of [["top-s", topS], ["max-len", maxLen], ["batch", batchSize]] as const) {
    if (!Number.isInteger(value) || value < 1) {
      console.error(`error: --${name} must be a positive integer`);
      return 2;
    }
  }

  try {
    const scorer = await resolveScorer(values.checkpoint!, {
      device: values.device,
      quantized: values.quantized,
      batchSize,
    });
    const result = await encodeCorpus(values.corpus, values.out, scorer, { maxLen, topS });
    console.log(
      `encoded ${result.encoded} document(s), skipped ${result.skipped} already present -> ${values.out}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

import { pathToFileURL } from "node:url";

if (typeof process.argv[1] === "string" && import.meta.url === pathToFileURL(process.argv[1]).href) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
