export {
  DEFAULT_CHECKPOINT,
  HashScorer,
  MlmScorer,
  TransformersScorer,
  resolveScorer,
} from "./backends.js";
export {
  DEFAULT_BATCH_SIZE,
  DEFAULT_MAX_LEN,
  DEFAULT_TOP_S,
  EncoderConfig,
  encodeCorpus,
  encodeDocument,
} from "./encode.js";
export {
  collectNonzero,
  maxInPlace,
  pruneTopS,
  recordLine,
  spladeActivation,
  SparseEntry,
  windowize,
} from "./pipeline.js";
