/** Training configuration with the two published preset profiles. */

export type ModelSize = "small" | "base";
export type OptimizerName = "adafactor" | "adamw";

export interface TrainSpec {
  modelSize: ModelSize;
  optimizer: OptimizerName;
  learningRate: number;
  epochs: number;
  batchSize: number;
  tokenizerId: string;
}

/** Large-corpus profile. */
export function smallSpec(): TrainSpec {
  return {
    modelSize: "small",
    optimizer: "adafactor",
    learningRate: 1e-3,
    epochs: 6,
    batchSize: 64,
    tokenizerId: "char-v1",
  };
}

/** Small-dataset profile. */
export function baseSpec(): TrainSpec {
  return {
    modelSize: "base",
    optimizer: "adamw",
    learningRate: 5e-5,
    epochs: 10,
    batchSize: 16,
    tokenizerId: "char-v1",
  };
}

export function specFor(size: ModelSize): TrainSpec {
  return size === "small" ? smallSpec() : baseSpec();
}

/** Hidden sizes per model-size tag, scaled for desk hardware. */
export function dimsFor(size: ModelSize): { embedDim: number; hiddenDim: number } {
  return size === "small"
    ? { embedDim: 24, hiddenDim: 96 }
    : { embedDim: 32, hiddenDim: 160 };
}
