#!/usr/bin/env node
/**
 * Command line entry points: `train` fits a checkpoint from a JSONL
 * corpus, `serve` exposes an existing checkpoint over the wire protocol.
 */

import { Command } from "commander";

import { loadCheckpoint } from "./checkpoint";
import { makeApp } from "./server";
import { ModelSize, specFor } from "./spec";
import { train } from "./train";

const program = new Command();
program.name("trainer-service").description("train and serve small text-to-text models");

program
  .command("train")
  .description("train a model on a JSONL corpus of {input, output} records")
  .requiredOption("--corpus <path>", "JSONL corpus path")
  .requiredOption("--out <dir>", "checkpoint output directory")
  .option("--size <size>", "model size preset (small or base)", "small")
  .option("--epochs <n>", "override the preset epoch count")
  .option("--batch <n>", "override the preset batch size")
  .option("--window <n>", "context window in tokens", "64")
  .option("--seed <n>", "weight init and shuffle seed", "1")
  .option("--resume <dir>", "resume from an existing checkpoint")
  .option("--quiet", "suppress per-epoch progress", false)
  .action(async (opts) => {
    if (opts.size !== "small" && opts.size !== "base") {
      throw new Error(`unknown model size: ${opts.size}`);
    }
    const spec = specFor(opts.size as ModelSize);
    const seed = parseInt(opts.seed, 10);
    const result = await train(opts.corpus, spec, opts.out, {
      epochs: opts.epochs === undefined ? undefined : parseInt(opts.epochs, 10),
      batchSize: opts.batch === undefined ? undefined : parseInt(opts.batch, 10),
      windowSize: parseInt(opts.window, 10),
      initSeed: seed,
      shuffleSeed: seed + 1,
      resumeFrom: opts.resume,
      quiet: opts.quiet,
    });
    console.log(
      `trained ${result.records} records (${result.examples} positions, ` +
        `${result.steps} steps); loss ${result.firstLoss.toFixed(4)} -> ` +
        `${result.finalLoss.toFixed(4)}; checkpoint at ${result.checkpointDir}`
    );
  });

program
  .command("serve")
  .description("serve a trained checkpoint over HTTP")
  .requiredOption("--checkpoint <dir>", "checkpoint directory to load")
  .option("--port <n>", "port to bind (0 picks a free port)", "8080")
  .option("--host <host>", "interface to bind", "127.0.0.1")
  .action(async (opts) => {
    const loaded = await loadCheckpoint(opts.checkpoint);
    const app = makeApp(loaded.lm, loaded.spec);
    const server = app.listen(parseInt(opts.port, 10), opts.host, () => {
      const address = server.address();
      const port = typeof address === "object" && address !== null ? address.port : opts.port;
      console.log(`trainer-service listening on http://${opts.host}:${port}`);
    });
  });

program.parseAsync(process.argv).catch((err: Error) => {
  console.error(`error: ${err.message}`);
  process.exit(1);
});
