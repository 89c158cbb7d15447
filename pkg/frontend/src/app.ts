// Browser entry point: wires the wizard form and the live monitor into the
// page. Deliberately framework-free; all state lives in AssetWizard /
// LiveMonitor and this file only renders it.

import { ApiClient } from "./api.js";
import { LiveMonitor } from "./monitor.js";
import { AssetWizard, WIZARD_STEPS } from "./wizard.js";
import type { AggregateFn } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) node.textContent = text;
  if (className) node.className = className;
  return node;
}

function renderWizard(root: HTMLElement, wizard: AssetWizard): void {
  root.replaceChildren();
  root.append(el("h2", `Asset builder — step: ${wizard.step}`));
  const steps = el("ol", undefined, "steps");
  for (const step of WIZARD_STEPS) {
    const item = el("li", step, step === wizard.step ? "active" : "");
    steps.append(item);
  }
  root.append(steps);

  const errors = wizard.stepErrors();
  if (errors.length > 0) {
    const list = el("ul", undefined, "errors");
    for (const e of errors) list.append(el("li", e));
    root.append(list);
  }

  const poiList = el("ul", undefined, "pois");
  for (const poi of wizard.pois) {
    poiList.append(
      el(
        "li",
        `#${poi.id} (${poi.lat}, ${poi.lon}) ${poi.type} ` +
          `"${poi.question}" · ${poi.options.length} options · ` +
          `${poi.sensors.join("+") || "no sensors"} · r=${poi.vicinity}m`,
      ),
    );
  }
  root.append(poiList);

  const nav = el("div", undefined, "nav");
  const back = el("button", "Back");
  back.onclick = () => {
    wizard.back();
    renderWizard(root, wizard);
  };
  const next = el("button", "Next");
  next.disabled = !wizard.canAdvance();
  next.onclick = () => {
    wizard.next();
    renderWizard(root, wizard);
  };
  nav.append(back, next);
  root.append(nav);

  if (wizard.step === "review") {
    const preview = el("pre", wizard.serialize(), "preview");
    root.append(preview);
  }
}

function renderMonitor(root: HTMLElement, monitor: LiveMonitor): void {
  root.replaceChildren();
  root.append(el("h2", `Live monitor (${monitor.fn})`));
  if (monitor.frozen) {
    root.append(el("p", "task closed — showing final state", "frozen"));
  }

  const chart = el("div", undefined, "chart");
  const values = monitor.series
    .map((s) => s.value)
    .filter((v): v is number => v !== null);
  const max = values.length ? Math.max(...values, 1) : 1;
  for (const sample of monitor.series) {
    const bar = el("span", undefined, "bar");
    const height = sample.value === null ? 0 : (sample.value / max) * 100;
    bar.style.height = `${height}%`;
    bar.title = `t=${sample.polledAt} ${sample.fn}=${sample.value} n=${sample.count}`;
    chart.append(bar);
  }
  root.append(chart);

  const table = el("table", undefined, "occupancy");
  const head = el("tr");
  head.append(el("th", "POI"), el("th", "inside"), el("th", "answered"));
  table.append(head);
  for (const row of monitor.occupancy()) {
    const tr = el("tr");
    tr.append(
      el("td", String(row.questionId)),
      el("td", String(row.inside)),
      el("td", String(row.answered)),
    );
    table.append(tr);
  }
  root.append(table);
}

export function mount(root: HTMLElement): void {
  const params = new URLSearchParams(location.search);
  const api = new ApiClient({
    baseUrl: params.get("api") ?? "http://127.0.0.1:8800",
    designerToken: params.get("token") ?? undefined,
  });
  const wizard = new AssetWizard();
  const wizardRoot = el("section");
  const monitorRoot = el("section");
  root.append(wizardRoot, monitorRoot);
  renderWizard(wizardRoot, wizard);

  const taskId = params.get("task");
  if (taskId) {
    const fn = (params.get("fn") ?? "avg") as AggregateFn;
    const monitor = new LiveMonitor(api, taskId, fn);
    monitor.start(Number(params.get("interval") ?? 1500));
    setInterval(() => renderMonitor(monitorRoot, monitor), 1000);
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app")!);
}
