/** Typed client for the gateway's /v1 HTTP surface. */

export interface PoseDoc {
  p: [number, number, number];
  q: [number, number, number, number];
}

export interface ModuleRow {
  module_id: string;
  state: string;
  last_heartbeat_seq: number;
  attach_time: number;
  descriptor: {
    name: string;
    kind: string;
    capabilities: { verb: string }[];
    mount_pose: PoseDoc;
    info: Record<string, unknown>;
  };
}

export interface CellSnapshot {
  modules: ModuleRow[];
  equipped_tools: Record<string, { tool_id: string } | null>;
  sim_time: number;
}

export interface SkillEntry {
  name: string;
  version: number;
  kind: string;
  payload: { samples?: unknown[] };
  meta: Record<string, unknown>;
}

export interface Finding {
  kind: string;
  severity: string;
  state: string;
  detail: string;
}

export interface RunReport {
  run_id: string;
  sequence: string;
  source_hash: string;
  records: { state: string; entered: number; exited: number | null; outcome: string | null }[];
  final_outcome: string | null;
  event_seq_range: [number, number];
}

export interface IRStateDoc {
  id: string;
  action: { type: string; [k: string]: unknown };
  transitions: Record<string, string>;
}

export interface SequenceIRDoc {
  name: string;
  entry: string;
  states: IRStateDoc[];
  source_hash: string;
}

export class GatewayError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
    public findings?: Finding[],
  ) {
    super(`${code}: ${detail}`);
  }
}

export class GatewayApi {
  constructor(public baseUrl: string) {}

  private async req<T>(method: string, path: string, body?: unknown, asText = false): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      if (typeof body === "string") {
        init.body = body;
        init.headers = { "content-type": "text/plain" };
      } else {
        init.body = JSON.stringify(body);
        init.headers = { "content-type": "application/json" };
      }
    }
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) {
      let code = `http_${resp.status}`;
      let detail = resp.statusText;
      let findings: Finding[] | undefined;
      try {
        const doc = await resp.json();
        code = doc.error ?? code;
        detail = doc.detail ?? detail;
        findings = doc.findings;
      } catch {
        /* non-JSON error body */
      }
      throw new GatewayError(resp.status, code, detail, findings);
    }
    return (asText ? resp.text() : resp.json()) as Promise<T>;
  }

  cell(): Promise<CellSnapshot> {
    return this.req("GET", "/v1/cell");
  }

  skills(): Promise<{ skills: SkillEntry[] }> {
    return this.req("GET", "/v1/skills");
  }

  skill(name: string, version?: number): Promise<SkillEntry> {
    const q = version ? `?version=${version}` : "";
    return this.req("GET", `/v1/skills/${encodeURIComponent(name)}${q}`);
  }

  skillHistory(name: string): Promise<{ versions: SkillEntry[] }> {
    return this.req("GET", `/v1/skills/${encodeURIComponent(name)}/history`);
  }

  deleteSkill(name: string): Promise<{ deleted: string }> {
    return this.req("DELETE", `/v1/skills/${encodeURIComponent(name)}`);
  }

  recordStart(robot: string, rate = 50): Promise<{ session_id: string }> {
    return this.req("POST", "/v1/teach/record/start", { robot, rate });
  }

  recordStop(sessionId: string): Promise<{ samples: number; duration: number }> {
    return this.req("POST", "/v1/teach/record/stop", { session_id: sessionId });
  }

  teachSave(sessionId: string, name: string): Promise<{ name: string; version: number }> {
    return this.req("POST", "/v1/teach/save", { session_id: sessionId, name });
  }

  compile(text: string): Promise<{ name: string; states: number; source_hash: string }> {
    return this.req("POST", "/v1/sequences", text);
  }

  sequences(): Promise<{ sequences: string[] }> {
    return this.req("GET", "/v1/sequences");
  }

  listing(name: string): Promise<string> {
    return this.req("GET", `/v1/sequences/${encodeURIComponent(name)}/listing`, undefined, true);
  }

  dot(name: string): Promise<string> {
    return this.req("GET", `/v1/sequences/${encodeURIComponent(name)}/dot`, undefined, true);
  }

  ir(name: string): Promise<SequenceIRDoc> {
    return this.req("GET", `/v1/sequences/${encodeURIComponent(name)}/ir`);
  }

  validateSeq(name: string): Promise<{ findings: Finding[]; runnable: boolean }> {
    return this.req("POST", `/v1/sequences/${encodeURIComponent(name)}/validate`);
  }

  runSeq(name: string): Promise<{ run_id: string }> {
    return this.req("POST", `/v1/sequences/${encodeURIComponent(name)}/run`);
  }

  run(runId: string): Promise<RunReport> {
    return this.req("GET", `/v1/runs/${encodeURIComponent(runId)}`);
  }

  moduleCmd(
    moduleId: string,
    verb: string,
    params: Record<string, unknown> = {},
  ): Promise<{ outcome: string; result: Record<string, unknown> }> {
    return this.req("POST", `/v1/modules/${encodeURIComponent(moduleId)}/cmd`, { verb, params });
  }
}
