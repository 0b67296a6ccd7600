export { CharTokenizer, PAD, EOS, SEP, UNK, TokenizerState } from "./tokenizer";
export { CorpusFormatError, CorpusRecord, readCorpus } from "./corpus";
export { ModelSize, OptimizerName, TrainSpec, baseSpec, dimsFor, smallSpec, specFor } from "./spec";
export { LmConfig, SampleOptions, SampleOut, TextLm, buildNetwork, mulberry32 } from "./model";
export {
  LoadedCheckpoint,
  NamedTensor,
  cloneForTraining,
  loadCheckpoint,
  saveCheckpoint,
} from "./checkpoint";
export { TrainOptions, TrainResult, train } from "./train";
export { makeApp } from "./server";
