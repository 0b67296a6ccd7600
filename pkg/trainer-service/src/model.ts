/**
 * Small decoder-style language model over characters.
 *
 * Next-token prediction from a fixed window of preceding tokens
 * (left-padded), which keeps desk-scale training fast while supporting
 * real autoregressive sampling and teacher-forced scoring. A training
 * sequence is `input tokens, SEP, output tokens, EOS`; the loss runs over
 * the output side only.
 */

import * as tf from "@tensorflow/tfjs";

import { CharTokenizer, EOS, PAD, SEP } from "./tokenizer";

export interface LmConfig {
  windowSize: number;
  embedDim: number;
  hiddenDim: number;
  vocabSize: number;
  initSeed: number;
}

export interface SampleOut {
  text: string;
  logprob: number;
}

export interface SampleOptions {
  /** Softmax temperature for choosing tokens; 1.0 is pure sampling. */
  temperature?: number;
  /** Nucleus cutoff; tokens outside the smallest mass >= topP are dropped. */
  topP?: number;
}

/** Deterministic float stream in [0, 1). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function buildNetwork(config: LmConfig): tf.LayersModel {
  const seed = config.initSeed;
  const model = tf.sequential();
  model.add(
    tf.layers.embedding({
      inputDim: config.vocabSize,
      outputDim: config.embedDim,
      inputLength: config.windowSize,
      embeddingsInitializer: tf.initializers.glorotUniform({ seed }),
    })
  );
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({
      units: config.hiddenDim,
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
    })
  );
  model.add(
    tf.layers.dense({
      units: config.vocabSize,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 2 }),
    })
  );
  return model;
}

function windowOf(tokens: number[], upto: number, windowSize: number): number[] {
  const start = Math.max(0, upto - windowSize);
  const slice = tokens.slice(start, upto);
  while (slice.length < windowSize) slice.unshift(PAD);
  return slice;
}

/** Pick one token id from a log-prob row at the given draw point u. */
function drawToken(
  logProbs: Float32Array,
  offset: number,
  vocab: number,
  u: number,
  temperature: number,
  topP: number
): number {
  // exp(l/T) renormalized equals the tempered softmax, so the normalized
  // log probs can be tempered directly.
  const weights = new Float64Array(vocab);
  for (let t = 0; t < vocab; t++) {
    weights[t] = Math.exp(logProbs[offset + t] / temperature);
  }

  let ids = Array.from({ length: vocab }, (_, t) => t);
  if (topP < 1.0) {
    ids.sort((a, b) => weights[b] - weights[a]);
    let mass = 0;
    const total = ids.reduce((s, t) => s + weights[t], 0);
    let keep = 0;
    while (keep < vocab && mass < topP * total) {
      mass += weights[ids[keep]];
      keep += 1;
    }
    ids = ids.slice(0, Math.max(1, keep));
  }

  const total = ids.reduce((s, t) => s + weights[t], 0);
  let acc = 0;
  for (const t of ids) {
    acc += weights[t] / total;
    if (u < acc) return t;
  }
  return ids[ids.length - 1];
}

export class TextLm {
  constructor(
    readonly net: tf.LayersModel,
    readonly tokenizer: CharTokenizer,
    readonly config: LmConfig
  ) {}

  static build(
    tokenizer: CharTokenizer,
    opts: { windowSize: number; embedDim: number; hiddenDim: number; initSeed?: number }
  ): TextLm {
    const config: LmConfig = {
      windowSize: opts.windowSize,
      embedDim: opts.embedDim,
      hiddenDim: opts.hiddenDim,
      vocabSize: tokenizer.vocabSize,
      initSeed: opts.initSeed ?? 1,
    };
    return new TextLm(buildNetwork(config), tokenizer, config);
  }

  /** Teacher-forcing pairs for one record: windows over the answer side. */
  examplePositions(input: string, output: string): { xs: number[][]; ys: number[] } {
    const tokens = [...this.tokenizer.encode(input), SEP, ...this.tokenizer.encode(output), EOS];
    const answerStart = this.tokenizer.encode(input).length + 1;
    const xs: number[][] = [];
    const ys: number[] = [];
    for (let pos = answerStart; pos < tokens.length; pos++) {
      xs.push(windowOf(tokens, pos, this.config.windowSize));
      ys.push(tokens[pos]);
    }
    return { xs, ys };
  }

  private logProbRows(contexts: number[][]): Float32Array {
    return tf.tidy(() => {
      const x = tf.tensor2d(contexts, [contexts.length, this.config.windowSize], "int32");
      const logits = this.net.predict(x) as tf.Tensor2D;
      return tf.logSoftmax(logits).dataSync() as Float32Array;
    });
  }

  /**
   * Draw n continuations of the input. The same seed reproduces the same
   * batch. Temperature and nucleus cutoffs only shape how tokens are
   * CHOSEN; each returned logprob is the sum of the chosen tokens' log
   * probabilities under the unmodified model (EOS included when
   * generation stops on it), so it always agrees with score().
   */
  sample(
    input: string,
    n: number,
    maxNewTokens: number,
    seed?: number,
    options: SampleOptions = {}
  ): SampleOut[] {
    const temperature = options.temperature ?? 1.0;
    const topP = options.topP ?? 1.0;
    const rng = mulberry32(seed ?? Math.floor(Math.random() * 2 ** 31));
    const prefix = [...this.tokenizer.encode(input), SEP];
    const rows = Array.from({ length: n }, () => ({
      tokens: [...prefix],
      generated: [] as number[],
      logprob: 0,
      done: false,
    }));

    for (let step = 0; step < maxNewTokens; step++) {
      const active = rows.filter((r) => !r.done);
      if (active.length === 0) break;
      const contexts = active.map((r) =>
        windowOf(r.tokens, r.tokens.length, this.config.windowSize)
      );
      const logProbs = this.logProbRows(contexts);
      const v = this.config.vocabSize;
      active.forEach((row, i) => {
        const offset = i * v;
        const picked = drawToken(logProbs, offset, v, rng(), temperature, topP);
        row.logprob += logProbs[offset + picked];
        row.tokens.push(picked);
        if (picked === EOS) row.done = true;
        else row.generated.push(picked);
      });
    }

    return rows.map((row) => ({
      text: this.tokenizer.decode(row.generated),
      logprob: row.logprob,
    }));
  }

  /** Teacher-forced log P(output, EOS | input) for each output. */
  score(input: string, outputs: string[]): number[] {
    if (outputs.length === 0) return [];
    const contexts: number[][] = [];
    const targets: number[] = [];
    const spans: number[] = [];
    for (const output of outputs) {
      const { xs, ys } = this.examplePositions(input, output);
      contexts.push(...xs);
      targets.push(...ys);
      spans.push(ys.length);
    }
    const logProbs = this.logProbRows(contexts);
    const v = this.config.vocabSize;
    const scores: number[] = [];
    let row = 0;
    for (const span of spans) {
      let total = 0;
      for (let j = 0; j < span; j++, row++) {
        total += logProbs[row * v + targets[row]];
      }
      scores.push(total);
    }
    return scores;
  }
}
