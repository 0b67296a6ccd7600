/**
 * Training loop: teacher forcing over the output side of each record,
 * cross-entropy on next-token logits, Adam updates. Every logged step
 * appends a JSON line to loss.log in the checkpoint directory, and the
 * finished run saves model plus optimizer state so training can resume.
 */

import * as fs from "fs";
import * as path from "path";

import * as tf from "@tensorflow/tfjs";

import { NamedTensor, cloneForTraining, loadCheckpoint, saveCheckpoint } from "./checkpoint";
import { readCorpus } from "./corpus";
import { TextLm, mulberry32 } from "./model";
import { TrainSpec, dimsFor } from "./spec";
import { CharTokenizer } from "./tokenizer";

export interface TrainOptions {
  epochs?: number;
  batchSize?: number;
  windowSize?: number;
  initSeed?: number;
  shuffleSeed?: number;
  resumeFrom?: string;
  quiet?: boolean;
}

export interface TrainResult {
  checkpointDir: string;
  records: number;
  examples: number;
  steps: number;
  firstLoss: number;
  finalLoss: number;
}

function shuffled(n: number, rng: () => number): number[] {
  const order = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  return order;
}

export async function train(
  corpusPath: string,
  spec: TrainSpec,
  outDir: string,
  options: TrainOptions = {}
): Promise<TrainResult> {
  const records = readCorpus(corpusPath);
  const epochs = options.epochs ?? spec.epochs;
  const batchSize = options.batchSize ?? spec.batchSize;

  let lm: TextLm;
  let optimizerState: NamedTensor[] | null = null;
  if (options.resumeFrom !== undefined) {
    const loaded = await loadCheckpoint(options.resumeFrom);
    lm = cloneForTraining(loaded);
    optimizerState = loaded.optimizerState;
  } else {
    const tokenizer = CharTokenizer.fromTexts(
      records.flatMap((r) => [r.input, r.output])
    );
    const dims = dimsFor(spec.modelSize);
    lm = TextLm.build(tokenizer, {
      windowSize: options.windowSize ?? 64,
      embedDim: dims.embedDim,
      hiddenDim: dims.hiddenDim,
      initSeed: options.initSeed ?? 1,
    });
  }

  const xs: number[][] = [];
  const ys: number[] = [];
  for (const record of records) {
    const positions = lm.examplePositions(record.input, record.output);
    xs.push(...positions.xs);
    ys.push(...positions.ys);
  }

  const optimizer = tf.train.adam(spec.learningRate);
  if (optimizerState !== null) {
    await optimizer.setWeights(optimizerState);
  }
  const varList = lm.net.trainableWeights.map((w) => w.read() as tf.Variable);
  const vocab = lm.config.vocabSize;
  const window = lm.config.windowSize;

  fs.mkdirSync(outDir, { recursive: true });
  const lossLog = path.join(outDir, "loss.log");
  const logLines: string[] = [];
  const rng = mulberry32(options.shuffleSeed ?? 7);

  let step = 0;
  let firstLoss = NaN;
  let finalLoss = NaN;
  for (let epoch = 0; epoch < epochs; epoch++) {
    const order = shuffled(xs.length, rng);
    let epochLoss = 0;
    let batches = 0;
    for (let at = 0; at < order.length; at += batchSize) {
      const idx = order.slice(at, at + batchSize);
      const batchXs = idx.map((i) => xs[i]);
      const batchYs = idx.map((i) => ys[i]);
      let loss: number;
      try {
        loss = tf.tidy(() => {
          const x = tf.tensor2d(batchXs, [idx.length, window], "int32");
          const y = tf.tensor1d(batchYs, "int32");
          const cost = optimizer.minimize(
            () => {
              const logits = lm.net.apply(x) as tf.Tensor2D;
              return tf.losses.softmaxCrossEntropy(tf.oneHot(y, vocab), logits);
            },
            true,
            varList
          );
          return (cost as tf.Scalar).dataSync()[0];
        });
      } catch (err) {
        const message = err instanceof Error ? err.message : String(err);
        if (/memory|alloc|heap/i.test(message)) {
          throw new Error(
            `out of memory during training step (batch size ${idx.length}); ` +
              `retry with a smaller --batch: ${message}`
          );
        }
        throw err;
      }
      if (Number.isNaN(firstLoss)) firstLoss = loss;
      finalLoss = loss;
      logLines.push(JSON.stringify({ step, epoch, loss }));
      step += 1;
      epochLoss += loss;
      batches += 1;
    }
    if (!options.quiet) {
      console.log(`epoch ${epoch + 1}/${epochs} mean loss ${(epochLoss / batches).toFixed(4)}`);
    }
  }

  fs.writeFileSync(lossLog, logLines.join("\n") + "\n");
  await saveCheckpoint(outDir, lm, spec, optimizer);
  return {
    checkpointDir: outDir,
    records: records.length,
    examples: xs.length,
    steps: step,
    firstLoss,
    finalLoss,
  };
}
