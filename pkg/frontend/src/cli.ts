/** Command-line entry: train a placement agent or evaluate a checkpoint. */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { EnvClient, EnvFlags } from "./client.js";
import { FeatureExtractor } from "./extractor.js";
import { Rng } from "./rng.js";
import { DEFAULT_SAC, SacAgent } from "./sac.js";
import { loadCheckpoint, train } from "./trainer.js";
import { evaluatePolicy } from "./evaluate.js";
import { StageConfig } from "./pointops.js";

export function parseStages(text: string): StageConfig[] {
  // "16x8x32,4x8x64,1x4x128" -> [{k,g,channels}, ...]
  return text.split(",").map((s) => {
    const [k, g, channels] = s.split("x").map(Number);
    return { k, g, channels };
  });
}

export function buildAgent(
  stagesText: string,
  numCameras: number,
  maxStepMove: number,
  seed: number,
  overrides: Partial<typeof DEFAULT_SAC> = {},
): { agent: SacAgent; extractor: FeatureExtractor } {
  const stages = parseStages(stagesText);
  const extractor = new FeatureExtractor({ stages, activation: "relu" }, new Rng(seed ^ 0xfe17));
  const manualLen = 6 + 3 * numCameras;
  const featDim = extractor.outputDim + manualLen;
  const agent = new SacAgent(extractor, featDim, {
    ...DEFAULT_SAC,
    ...overrides,
    seed,
    actionDim: 2 * numCameras,
    maxAction: maxStepMove,
  });
  return { agent, extractor };
}

function envFlags(argv: any): EnvFlags {
  return {
    numCameras: argv.numCameras,
    range: argv.range,
    maxSteps: argv.maxSteps,
    maxStepMove: argv.maxStepMove,
    coverageCells: argv.coverageCells,
    obsCap: argv.obsCap,
    smBins: argv.smBins,
  };
}

const sharedEnvOptions = {
  "num-cameras": { type: "number" as const, default: 1 },
  range: { type: "number" as const, default: 3.0 },
  "max-steps": { type: "number" as const, default: 50 },
  "max-step-move": { type: "number" as const, default: 0.5 },
  "coverage-cells": { type: "number" as const, default: 32 },
  "obs-cap": { type: "number" as const, default: 64 },
  "sm-bins": { type: "string" as const, default: "64x32" },
  stages: { type: "string" as const, default: "8x4x16,4x4x32,1x4x64" },
};

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .command(
      "train <scene>",
      "train SAC against a scene served over the wire protocol",
      (y) =>
        y
          .positional("scene", { type: "string", demandOption: true })
          .options(sharedEnvOptions)
          .option("steps", { type: "number", default: 20000 })
          .option("warmup", { type: "number", default: 300 })
          .option("update-every", { type: "number", default: 5 })
          .option("seed", { type: "number", default: 0 })
          .option("out", { type: "string", default: "runs/agent" }),
      async (argv) => {
        const { agent, extractor } = buildAgent(
          argv.stages, argv.numCameras, argv.maxStepMove, argv.seed);
        const client = EnvClient.spawnStdio(argv.scene as string, envFlags(argv));
        const rows = await train(client, agent, extractor, {
          totalSteps: argv.steps,
          warmupSteps: argv.warmup,
          updateEvery: argv.updateEvery,
          seed: argv.seed,
          curvesPath: `${argv.out}/curves_seed${argv.seed}.csv`,
          checkpointPath: `${argv.out}/checkpoint_seed${argv.seed}.json`,
          logEvery: 20,
        });
        await client.close();
        const last = rows[rows.length - 1];
        process.stdout.write(
          `episodes=${rows.length} final_coverage=${last?.coverage.toFixed(3)} ` +
            `final_doe=${last?.doe.toFixed(4)}\n`,
        );
      },
    )
    .command(
      "evaluate <checkpoint> <scenes..>",
      "run a trained policy deterministically and report final errors",
      (y) =>
        y
          .positional("checkpoint", { type: "string", demandOption: true })
          .positional("scenes", { type: "string", array: true, demandOption: true })
          .options(sharedEnvOptions)
          .option("seed", { type: "number", default: 0 })
          .option("out", { type: "string", default: "runs/eval" }),
      async (argv) => {
        const { agent, extractor } = loadCheckpoint(argv.checkpoint as string);
        const results = await evaluatePolicy(
          argv.scenes as string[], agent, extractor, envFlags(argv), argv.seed,
          argv.out);
        for (const r of results)
          process.stdout.write(`${r.scene},${r.finalError.toFixed(6)}\n`);
      },
    )
    .demandCommand(1)
    .strict()
    .parseAsync();
}

const invokedDirectly =
  process.argv[1] && (process.argv[1].endsWith("cli.ts") || process.argv[1].endsWith("cli.js"));
if (invokedDirectly) {
  main().catch((err) => {
    console.error(err);
    process.exit(1);
  });
}
