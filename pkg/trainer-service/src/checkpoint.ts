/**
 * Checkpoint directory layout:
 *
 *   config.json    model dims, window size, and the training spec
 *   vocab.json     tokenizer state
 *   model.json     layer topology plus weight manifest
 *   weights.bin    model parameters
 *   optimizer.json optimizer slot manifest (present after training)
 *   optimizer.bin  optimizer slot values
 *   loss.log       one JSON line per logged training step
 *
 * Plain tfjs has no filesystem IO handler, so saves capture the artifacts
 * in memory and the files are written here explicitly.
 */

import * as fs from "fs";
import * as path from "path";

import * as tf from "@tensorflow/tfjs";

import { LmConfig, TextLm, buildNetwork } from "./model";
import { TrainSpec } from "./spec";
import { CharTokenizer, TokenizerState } from "./tokenizer";

const FORMAT = "trainer-checkpoint-v1";

export interface NamedTensor {
  name: string;
  tensor: tf.Tensor;
}

interface CheckpointConfig {
  format: string;
  lm: LmConfig;
  spec: TrainSpec;
}

export interface LoadedCheckpoint {
  lm: TextLm;
  spec: TrainSpec;
  optimizerState: NamedTensor[] | null;
}

function joinBuffers(data: ArrayBuffer | ArrayBuffer[]): ArrayBuffer {
  if (!Array.isArray(data)) return data;
  const total = data.reduce((n, b) => n + b.byteLength, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const buf of data) {
    out.set(new Uint8Array(buf), at);
    at += buf.byteLength;
  }
  return out.buffer;
}

export async function saveCheckpoint(
  dir: string,
  lm: TextLm,
  spec: TrainSpec,
  optimizer?: tf.Optimizer
): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });

  let captured: tf.io.ModelArtifacts | null = null;
  await lm.net.save(
    tf.io.withSaveHandler(async (artifacts) => {
      captured = artifacts;
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
    })
  );
  if (captured === null) throw new Error("model save handler produced no artifacts");
  const artifacts = captured as tf.io.ModelArtifacts;

  const config: CheckpointConfig = { format: FORMAT, lm: lm.config, spec };
  fs.writeFileSync(path.join(dir, "config.json"), JSON.stringify(config, null, 2));
  fs.writeFileSync(path.join(dir, "vocab.json"), JSON.stringify(lm.tokenizer.toJSON(), null, 2));
  fs.writeFileSync(
    path.join(dir, "model.json"),
    JSON.stringify({
      modelTopology: artifacts.modelTopology,
      weightSpecs: artifacts.weightSpecs,
    })
  );
  fs.writeFileSync(
    path.join(dir, "weights.bin"),
    Buffer.from(joinBuffers(artifacts.weightData as ArrayBuffer | ArrayBuffer[]))
  );

  if (optimizer !== undefined) {
    const slots = await optimizer.getWeights();
    const encoded = await tf.io.encodeWeights(slots);
    fs.writeFileSync(
      path.join(dir, "optimizer.json"),
      JSON.stringify({ specs: encoded.specs })
    );
    fs.writeFileSync(path.join(dir, "optimizer.bin"), Buffer.from(encoded.data));
  }
}

function toArrayBuffer(buf: Buffer): ArrayBuffer {
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength) as ArrayBuffer;
}

export async function loadCheckpoint(dir: string): Promise<LoadedCheckpoint> {
  const configPath = path.join(dir, "config.json");
  if (!fs.existsSync(configPath)) {
    throw new Error(`no checkpoint at ${dir}: missing config.json`);
  }
  const config = JSON.parse(fs.readFileSync(configPath, "utf8")) as CheckpointConfig;
  if (config.format !== FORMAT) {
    throw new Error(`unsupported checkpoint format: ${config.format}`);
  }

  const vocab = JSON.parse(fs.readFileSync(path.join(dir, "vocab.json"), "utf8")) as TokenizerState;
  const tokenizer = new CharTokenizer(vocab);

  const manifest = JSON.parse(fs.readFileSync(path.join(dir, "model.json"), "utf8"));
  const weightData = toArrayBuffer(fs.readFileSync(path.join(dir, "weights.bin")));
  const net = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: manifest.modelTopology,
      weightSpecs: manifest.weightSpecs,
      weightData,
    })
  );

  let optimizerState: NamedTensor[] | null = null;
  const optPath = path.join(dir, "optimizer.json");
  if (fs.existsSync(optPath)) {
    const optManifest = JSON.parse(fs.readFileSync(optPath, "utf8"));
    const optData = toArrayBuffer(fs.readFileSync(path.join(dir, "optimizer.bin")));
    const decoded = tf.io.decodeWeights(optData, optManifest.specs);
    optimizerState = optManifest.specs.map((s: { name: string }) => ({
      name: s.name,
      tensor: decoded[s.name],
    }));
  }

  return { lm: new TextLm(net as tf.LayersModel, tokenizer, config.lm), spec: config.spec, optimizerState };
}

/** Fresh network with the checkpointed weights copied in, for resuming. */
export function cloneForTraining(loaded: LoadedCheckpoint): TextLm {
  const net = buildNetwork(loaded.lm.config);
  net.setWeights(loaded.lm.net.getWeights());
  return new TextLm(net, loaded.lm.tokenizer, loaded.lm.config);
}
