/**
 * HTTP front end for a trained checkpoint.
 *
 * Wire protocol (JSON over HTTP, natural-log likelihoods):
 *
 *   POST /v1/sample    {"input", "n", "max_new_tokens", "seed"?}
 *                      -> {"samples": [{"text", "logprob"}]}
 *   POST /v1/score     {"input", "outputs": [str]} -> {"logprobs": [float]}
 *   POST /v1/tokenize  {"text"} -> {"count": int}
 *   GET  /v1/health    -> {"status": "ok", "model": str}
 *
 * Every non-2xx response body is {"error": <message>}.
 */

import express, { Express, NextFunction, Request, Response } from "express";

import { TextLm } from "./model";
import { TrainSpec } from "./spec";

const MAX_N = 4096;
const MAX_NEW_TOKENS = 4096;

class BadRequest extends Error {}

function requireString(body: Record<string, unknown>, field: string): string {
  const value = body[field];
  if (typeof value !== "string") {
    throw new BadRequest(`'${field}' must be a string`);
  }
  return value;
}

function requireInt(
  body: Record<string, unknown>,
  field: string,
  min: number,
  max: number
): number {
  const value = body[field];
  if (typeof value !== "number" || !Number.isInteger(value) || value < min || value > max) {
    throw new BadRequest(`'${field}' must be an integer in [${min}, ${max}]`);
  }
  return value;
}

function optionalUnitFloat(
  body: Record<string, unknown>,
  field: string,
  min: number,
  max: number
): number | undefined {
  const value = body[field];
  if (value === undefined || value === null) return undefined;
  if (typeof value !== "number" || Number.isNaN(value) || value < min || value > max) {
    throw new BadRequest(`'${field}' must be a number in [${min}, ${max}]`);
  }
  return value;
}

function jsonBody(req: Request): Record<string, unknown> {
  if (typeof req.body !== "object" || req.body === null || Array.isArray(req.body)) {
    throw new BadRequest("request body must be a JSON object");
  }
  return req.body as Record<string, unknown>;
}

export function makeApp(lm: TextLm, spec: TrainSpec): Express {
  const app = express();
  app.use(express.json({ limit: "8mb" }));

  app.get("/v1/health", (_req, res) => {
    res.json({
      status: "ok",
      model: `char-lm-${spec.modelSize}`,
      vocab_size: lm.config.vocabSize,
      window_size: lm.config.windowSize,
    });
  });

  app.post("/v1/tokenize", (req, res) => {
    const body = jsonBody(req);
    const text = requireString(body, "text");
    res.json({ count: lm.tokenizer.count(text) });
  });

  app.post("/v1/sample", (req, res) => {
    const body = jsonBody(req);
    const input = requireString(body, "input");
    const n = requireInt(body, "n", 1, MAX_N);
    const maxNewTokens = requireInt(body, "max_new_tokens", 1, MAX_NEW_TOKENS);
    let seed: number | undefined;
    if (body.seed !== undefined && body.seed !== null) {
      seed = requireInt(body, "seed", -(2 ** 53), 2 ** 53);
    }
    const samples = lm.sample(input, n, maxNewTokens, seed, {
      temperature: optionalUnitFloat(body, "temperature", 0.05, 10.0),
      topP: optionalUnitFloat(body, "top_p", 0.0, 1.0),
    });
    res.json({ samples });
  });

  app.post("/v1/score", (req, res) => {
    const body = jsonBody(req);
    const input = requireString(body, "input");
    const outputs = body.outputs;
    if (!Array.isArray(outputs) || outputs.some((o) => typeof o !== "string")) {
      throw new BadRequest("'outputs' must be a list of strings");
    }
    res.json({ logprobs: lm.score(input, outputs as string[]) });
  });

  app.use((_req, res) => {
    res.status(404).json({ error: "not found" });
  });

  app.use((err: Error, _req: Request, res: Response, _next: NextFunction) => {
    if (err instanceof BadRequest) {
      res.status(400).json({ error: err.message });
    } else if (err instanceof SyntaxError) {
      res.status(400).json({ error: `invalid JSON body: ${err.message}` });
    } else {
      res.status(500).json({ error: err.message || "internal error" });
    }
  });

  return app;
}
