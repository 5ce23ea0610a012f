/**
 * Deterministic policy evaluation: run full episodes with the mean action,
 * export camera trajectories as CSV polylines, and score the final placement
 * with the toolkit's `evaluate` command so the reported error matches the
 * offline metric exactly.
 */

import { execFileSync } from "node:child_process";
import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { EnvClient, EnvFlags, StepResult } from "./client.js";
import { FeatureExtractor, manualFeatures } from "./extractor.js";
import { SacAgent } from "./sac.js";

export interface SceneEval {
  scene: string;
  finalError: number;
  finalCoverage: number;
  episodeDoe: number;
  trajectory: number[][][]; // [camera][step][x, y, z]
}

function reshape(action: Float64Array): number[][] {
  const out: number[][] = [];
  for (let i = 0; i < action.length; i += 2) out.push([action[i], action[i + 1]]);
  return out;
}

export async function runEpisodeDeterministic(
  client: EnvClient,
  agent: SacAgent,
  extractor: FeatureExtractor,
  seed: number,
  maxSteps: number,
): Promise<{ trajectory: number[][][]; last: StepResult }> {
  let res = await client.reset(seed);
  const numCameras = res.observation.cameras.length / 3;
  const trajectory: number[][][] = Array.from({ length: numCameras }, () => []);
  const record = (cams: number[]) => {
    for (let c = 0; c < numCameras; c++) trajectory[c].push(cams.slice(c * 3, c * 3 + 3));
  };
  record(res.observation.cameras);
  for (let s = 0; s < maxSteps; s++) {
    const pts = Float64Array.from(res.observation.points);
    const manual = manualFeatures(
      res.observation.bbox_min, res.observation.bbox_max, res.observation.cameras);
    const action = agent.actDeterministic(extractor.forward(pts, manual));
    res = await client.step(reshape(action));
    record(res.observation.cameras);
    if (res.done) break;
  }
  return { trajectory, last: res };
}

export function finalPlacementError(scenePath: string, cameras: number[], flags: EnvFlags): number {
  const literal = [] as string[];
  for (let i = 0; i < cameras.length; i += 3)
    literal.push(`${cameras[i]},${cameras[i + 1]},${cameras[i + 2]}`);
  const cmd = process.env.CAMPLACE_CMD ?? "camplace";
  const [bin, ...pre] = cmd.split(" ");
  // --cameras= form: a literal starting with a negative coordinate must not
  // be mistaken for a flag
  const out = execFileSync(bin, [
    ...pre, "evaluate", scenePath, `--cameras=${literal.join(";")}`,
    "--num-cameras", String(flags.numCameras), "--range", String(flags.range),
    ...(flags.smBins ? ["--sm-bins", flags.smBins] : []),
    ...(flags.coverageCells ? ["--coverage-cells", String(flags.coverageCells)] : []),
  ]).toString();
  const row = out.trim().split("\n")[1].split(",");
  return parseFloat(row[2]);
}

export async function evaluatePolicy(
  scenePaths: string[],
  agent: SacAgent,
  extractor: FeatureExtractor,
  flags: EnvFlags,
  seed: number,
  outDir: string,
  approach = "sac",
): Promise<SceneEval[]> {
  mkdirSync(outDir, { recursive: true });
  const results: SceneEval[] = [];
  const reportRows = ["scene,approach,final_error,seed,config_digest"];
  for (const scenePath of scenePaths) {
    const client = EnvClient.spawnStdio(scenePath, flags);
    const { trajectory, last } = await runEpisodeDeterministic(
      client, agent, extractor, seed, flags.maxSteps);
    await client.close();
    const sceneId = scenePath.split("/").pop()!.replace(/\.[^.]+$/, "");
    const finalError = finalPlacementError(scenePath, last.observation.cameras, flags);
    results.push({
      scene: sceneId,
      finalError,
      finalCoverage: last.reward?.sc ?? 0,
      episodeDoe: last.reward?.doe ?? 0,
      trajectory,
    });
    const lines = ["camera,step,x,y,z"];
    trajectory.forEach((cam, c) =>
      cam.forEach((p, s) => lines.push(`${c},${s},${p[0]},${p[1]},${p[2]}`)),
    );
    writeFileSync(join(outDir, `${sceneId}_trajectory.csv`), lines.join("\n") + "\n");
    reportRows.push(`${sceneId},${approach},${finalError.toFixed(6)},${seed},frontend`);
  }
  writeFileSync(join(outDir, "report.csv"), reportRows.join("\n") + "\n");
  return results;
}
