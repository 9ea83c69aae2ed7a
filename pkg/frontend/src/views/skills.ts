/** Skill database view: latest entries, per-skill detail with version
 * history, delete with in-use errors surfaced inline. */

import { GatewayApi, GatewayError, SkillEntry } from "../api.js";

export class SkillsView {
  readonly element: HTMLElement;
  private listBody: HTMLElement;
  private detail: HTMLElement;
  private message: HTMLElement;
  entries: SkillEntry[] = [];

  constructor(
    doc: Document,
    private api: GatewayApi,
  ) {
    this.element = doc.createElement("section");
    this.element.className = "view skills";
    this.element.innerHTML = `
      <h2>Skills</h2>
      <div class="message" data-role="message"></div>
      <table class="skill-list">
        <thead><tr><th>name</th><th>version</th><th>kind</th><th></th></tr></thead>
        <tbody data-role="list"></tbody>
      </table>
      <div class="skill-detail" data-role="detail"></div>`;
    this.listBody = this.element.querySelector('[data-role="list"]')!;
    this.detail = this.element.querySelector('[data-role="detail"]')!;
    this.message = this.element.querySelector('[data-role="message"]')!;
  }

  async refresh(): Promise<void> {
    this.entries = (await this.api.skills()).skills;
    const doc = this.element.ownerDocument;
    this.listBody.textContent = "";
    for (const entry of this.entries) {
      const tr = doc.createElement("tr");
      tr.dataset.skill = entry.name;
      const name = doc.createElement("td");
      name.textContent = entry.name;
      const version = doc.createElement("td");
      version.textContent = `@${entry.version}`;
      const kind = doc.createElement("td");
      kind.textContent = entry.kind;
      const actions = doc.createElement("td");
      const inspect = doc.createElement("button");
      inspect.textContent = "inspect";
      inspect.addEventListener("click", () => void this.inspect(entry.name));
      const del = doc.createElement("button");
      del.textContent = "delete";
      del.addEventListener("click", () => void this.remove(entry.name));
      actions.appendChild(inspect);
      actions.appendChild(del);
      tr.append(name, version, kind, actions);
      this.listBody.appendChild(tr);
    }
  }

  has(name: string, version?: number): boolean {
    return this.entries.some(
      (e) => e.name === name && (version === undefined || e.version === version),
    );
  }

  async inspect(name: string): Promise<void> {
    const entry = await this.api.skill(name);
    const history = await this.api.skillHistory(name);
    const samples = entry.payload.samples?.length ?? 0;
    this.detail.innerHTML = "";
    const doc = this.element.ownerDocument;
    const h = doc.createElement("h3");
    h.textContent = `${entry.name}@${entry.version} (${entry.kind}, ${samples} samples)`;
    const meta = doc.createElement("pre");
    meta.textContent = JSON.stringify(entry.meta, null, 2);
    const hist = doc.createElement("ul");
    hist.className = "history";
    for (const v of history.versions) {
      const li = doc.createElement("li");
      li.textContent = `v${v.version} — ${String(v.meta["created_wallclock"] ?? "")}`;
      hist.appendChild(li);
    }
    this.detail.append(h, meta, hist);
  }

  async remove(name: string): Promise<void> {
    try {
      await this.api.deleteSkill(name);
      this.message.textContent = `deleted ${name}`;
      await this.refresh();
    } catch (err) {
      if (err instanceof GatewayError) {
        this.message.textContent = `cannot delete ${name}: ${err.code} ${err.detail}`;
      } else {
        throw err;
      }
    }
  }
}
