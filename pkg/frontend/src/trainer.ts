/**
 * Training loop: interact with the environment server, fill the replay
 * buffer, and run SAC updates on a fixed cadence. Rewards are consumed after
 * the environment's reward mapping (the `mapped` field).
 */

import { appendFileSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { EnvClient, StepResult } from "./client.js";
import { FeatureExtractor, manualFeatures } from "./extractor.js";
import { loadParams, serializeParams } from "./nn.js";
import { Rng } from "./rng.js";
import { SacAgent } from "./sac.js";

export interface TrainConfig {
  totalSteps: number;
  warmupSteps: number;
  updateEvery: number;
  seed: number;
  curvesPath?: string;
  checkpointPath?: string;
  logEvery?: number;
}

export interface EpisodeRow {
  episode: number;
  steps: number;
  return_: number;
  coverage: number;
  doe: number;
}

function toPoints(obs: StepResult["observation"]): Float64Array {
  return Float64Array.from(obs.points);
}

function toManual(obs: StepResult["observation"]): number[] {
  return manualFeatures(obs.bbox_min, obs.bbox_max, obs.cameras);
}

function reshape(action: Float64Array): number[][] {
  const out: number[][] = [];
  for (let i = 0; i < action.length; i += 2) out.push([action[i], action[i + 1]]);
  return out;
}

export async function train(
  client: EnvClient,
  agent: SacAgent,
  extractor: FeatureExtractor,
  cfg: TrainConfig,
): Promise<EpisodeRow[]> {
  const rows: EpisodeRow[] = [];
  if (cfg.curvesPath) {
    mkdirSync(dirname(cfg.curvesPath), { recursive: true });
    writeFileSync(cfg.curvesPath, "episode,steps,return,coverage,doe\n");
  }

  let episode = 0;
  let res = await client.reset(cfg.seed + episode);
  let pts = toPoints(res.observation);
  let manual = toManual(res.observation);
  let epReturn = 0;
  let epSteps = 0;
  let lastReward = res.reward;

  for (let step = 1; step <= cfg.totalSteps; step++) {
    let action: Float64Array;
    if (step <= cfg.warmupSteps) {
      action = agent.uniformAction();
    } else {
      action = agent.act(extractor.forward(pts, manual));
    }
    res = await client.step(reshape(action));
    const nextPts = toPoints(res.observation);
    const nextManual = toManual(res.observation);
    agent.replay.push({
      pts,
      manual,
      action,
      reward: res.reward!.mapped,
      nextPts,
      nextManual,
      done: res.done,
    });
    epReturn += res.reward!.mapped;
    epSteps += 1;
    lastReward = res.reward;
    pts = nextPts;
    manual = nextManual;

    if (step > cfg.warmupSteps && step % cfg.updateEvery === 0) agent.update();

    if (res.done) {
      episode += 1;
      const row: EpisodeRow = {
        episode,
        steps: epSteps,
        return_: epReturn,
        coverage: lastReward!.sc,
        doe: lastReward!.doe,
      };
      rows.push(row);
      if (cfg.curvesPath)
        appendFileSync(
          cfg.curvesPath,
          `${row.episode},${row.steps},${row.return_.toFixed(6)},` +
            `${row.coverage.toFixed(6)},${row.doe.toFixed(6)}\n`,
        );
      if (cfg.logEvery && episode % cfg.logEvery === 0)
        process.stderr.write(
          `episode ${episode} steps=${step} return=${epReturn.toFixed(4)} ` +
            `coverage=${row.coverage.toFixed(2)} doe=${row.doe.toFixed(3)}\n`,
        );
      if (step < cfg.totalSteps) {
        res = await client.reset(cfg.seed + episode);
        pts = toPoints(res.observation);
        manual = toManual(res.observation);
      }
      epReturn = 0;
      epSteps = 0;
    }
  }

  if (cfg.checkpointPath) saveCheckpoint(cfg.checkpointPath, agent, extractor);
  return rows;
}

export function saveCheckpoint(path: string, agent: SacAgent, extractor: FeatureExtractor): void {
  mkdirSync(dirname(path), { recursive: true });
  const blob = {
    extractor: serializeParams(extractor.params),
    actor: serializeParams(agent.actor.params),
    critic1: serializeParams(agent.critic1.params),
    critic2: serializeParams(agent.critic2.params),
    config: {
      stages: extractor.config.stages,
      activation: extractor.config.activation,
      sac: agent.cfg,
      featDim: agent.featDim,
    },
  };
  writeFileSync(path, JSON.stringify(blob));
}

export function loadCheckpoint(path: string): { agent: SacAgent; extractor: FeatureExtractor } {
  const blob = JSON.parse(readFileSync(path, "utf-8"));
  const extractor = new FeatureExtractor(
    { stages: blob.config.stages, activation: blob.config.activation },
    new Rng(1),
  );
  const agent = new SacAgent(extractor, blob.config.featDim, blob.config.sac);
  loadParams(extractor.params, blob.extractor);
  loadParams(agent.actor.params, blob.actor);
  loadParams(agent.critic1.params, blob.critic1);
  loadParams(agent.critic2.params, blob.critic2);
  return { agent, extractor };
}
