/**
 * Client for the placement-environment wire protocol (newline-delimited JSON
 * over a spawned server process's stdio, or an existing TCP endpoint).
 */

import { ChildProcess, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";
import { Socket, createConnection } from "node:net";

export interface WireObservation {
  points: number[];
  bbox_min: number[] | null;
  bbox_max: number[] | null;
  cameras: number[];
  step: number;
}

export interface WireReward {
  sc: number;
  doe: number;
  penalty: boolean;
  combined: number;
  mapped: number;
}

export interface StepResult {
  observation: WireObservation;
  reward: WireReward | null;
  done: boolean;
}

export interface EnvFlags {
  numCameras: number;
  range: number;
  maxSteps: number;
  maxStepMove: number;
  coverageCells?: number;
  obsCap?: number;
  smBins?: string;
  rewardMapping?: string;
}

export function serverArgs(scenePath: string, flags: EnvFlags): string[] {
  const args = [
    "serve", scenePath, "--transport", "stdio",
    "--num-cameras", String(flags.numCameras),
    "--range", String(flags.range),
    "--max-steps", String(flags.maxSteps),
    "--max-step-move", String(flags.maxStepMove),
  ];
  if (flags.coverageCells) args.push("--coverage-cells", String(flags.coverageCells));
  if (flags.obsCap) args.push("--obs-cap", String(flags.obsCap));
  if (flags.smBins) args.push("--sm-bins", flags.smBins);
  if (flags.rewardMapping) args.push("--reward-mapping", flags.rewardMapping);
  return args;
}

type Pending = { resolve: (v: any) => void; reject: (e: Error) => void };

export class EnvClient {
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private reader: Interface;
  private child: ChildProcess | null = null;
  private socket: Socket | null = null;
  private write: (line: string) => void;

  private constructor(reader: Interface, write: (line: string) => void) {
    this.reader = reader;
    this.write = write;
    this.reader.on("line", (line) => this.onLine(line));
  }

  /** Spawn `camplace serve --transport stdio` (override binary with CAMPLACE_CMD). */
  static spawnStdio(scenePath: string, flags: EnvFlags): EnvClient {
    const cmd = process.env.CAMPLACE_CMD ?? "camplace";
    const [bin, ...pre] = cmd.split(" ");
    const child = spawn(bin, [...pre, ...serverArgs(scenePath, flags)], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const client = new EnvClient(
      createInterface({ input: child.stdout! }),
      (line) => child.stdin!.write(line + "\n"),
    );
    client.child = child;
    child.on("exit", () => client.failAll(new Error("server exited")));
    return client;
  }

  static connectTcp(host: string, port: number): Promise<EnvClient> {
    return new Promise((resolve, reject) => {
      const socket = createConnection({ host, port }, () => {
        const client = new EnvClient(
          createInterface({ input: socket }),
          (line) => socket.write(line + "\n"),
        );
        client.socket = socket;
        resolve(client);
      });
      socket.on("error", reject);
    });
  }

  private onLine(line: string): void {
    if (!line.trim()) return;
    const msg = JSON.parse(line);
    const p = this.pending.get(msg.id);
    if (!p) return;
    this.pending.delete(msg.id);
    if (msg.error) p.reject(new Error(msg.error));
    else p.resolve(msg);
  }

  private failAll(err: Error): void {
    for (const p of this.pending.values()) p.reject(err);
    this.pending.clear();
  }

  private request(body: Record<string, unknown>): Promise<any> {
    const id = this.nextId++;
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.write(JSON.stringify({ id, ...body }));
    });
  }

  async reset(seed: number): Promise<StepResult> {
    const msg = await this.request({ cmd: "reset", seed });
    return { observation: msg.observation, reward: null, done: msg.done };
  }

  async step(actions: number[][]): Promise<StepResult> {
    const msg = await this.request({ cmd: "step", actions });
    return { observation: msg.observation, reward: msg.reward, done: msg.done };
  }

  async close(): Promise<void> {
    try {
      await this.request({ cmd: "close" });
    } catch {
      // server may already be gone
    }
    this.child?.stdin?.end();
    this.socket?.end();
    this.reader.close();
  }
}
