// DOM wiring: reads the form, validates inline, talks to the advisor,
// and paints the charts. All scheduling math stays on the server.

import { AdvisorClient, ApiError } from "./api.js";
import { comparisonBars, overlayChart, sweepChart } from "./charts.js";
import {
  DEFAULT_FORM,
  FieldErrors,
  ScenarioForm,
  fromQuery,
  isValid,
  toQuery,
  toRequest,
  validate,
} from "./state.js";
import { comparisonRows, overlaySeries, sweepLines } from "./viewmodel.js";

const client = new AdvisorClient("");

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const fields = {
  region: () => $<HTMLSelectElement>("region"),
  startOffset: () => $<HTMLInputElement>("start-offset"),
  lengthSlots: () => $<HTMLInputElement>("length-slots"),
  completionSlots: () => $<HTMLInputElement>("completion-slots"),
  minServers: () => $<HTMLInputElement>("min-servers"),
  maxServers: () => $<HTMLInputElement>("max-servers"),
  curvePreset: () => $<HTMLSelectElement>("curve-preset"),
  customMc: () => $<HTMLInputElement>("custom-mc"),
  seed: () => $<HTMLInputElement>("seed"),
  accounting: () => $<HTMLSelectElement>("accounting"),
};

function readForm(): ScenarioForm {
  const policies = [...document.querySelectorAll<HTMLInputElement>("input[name=policy]")]
    .filter((box) => box.checked)
    .map((box) => box.value);
  return {
    region: fields.region().value,
    startOffset: Number(fields.startOffset().value),
    lengthSlots: Number(fields.lengthSlots().value),
    completionSlots: Number(fields.completionSlots().value),
    minServers: Number(fields.minServers().value),
    maxServers: Number(fields.maxServers().value),
    curvePreset: fields.curvePreset().value,
    customMc: fields.customMc().value,
    policies,
    seed: Number(fields.seed().value),
    accounting: fields.accounting().value as ScenarioForm["accounting"],
  };
}

function writeForm(form: ScenarioForm): void {
  fields.region().value = form.region;
  fields.startOffset().value = String(form.startOffset);
  fields.lengthSlots().value = String(form.lengthSlots);
  fields.completionSlots().value = String(form.completionSlots);
  fields.minServers().value = String(form.minServers);
  fields.maxServers().value = String(form.maxServers);
  fields.curvePreset().value = form.curvePreset;
  fields.customMc().value = form.customMc;
  fields.seed().value = String(form.seed);
  fields.accounting().value = form.accounting;
  for (const box of document.querySelectorAll<HTMLInputElement>("input[name=policy]")) {
    box.checked = form.policies.includes(box.value);
  }
}

function showErrors(errors: FieldErrors): void {
  for (const note of document.querySelectorAll<HTMLElement>(".field-error")) {
    const key = note.dataset.for as keyof ScenarioForm | undefined;
    note.textContent = key && errors[key] ? String(errors[key]) : "";
  }
  $<HTMLButtonElement>("run-scenario").disabled = Object.keys(errors).length > 0;
  $<HTMLButtonElement>("run-sweep").disabled = Object.keys(errors).length > 0;
}

function banner(message: string, retry?: () => void): void {
  const box = $("banner");
  box.innerHTML = "";
  if (!message) {
    box.hidden = true;
    return;
  }
  box.hidden = false;
  box.textContent = message;
  if (retry) {
    const button = document.createElement("button");
    button.textContent = "retry";
    button.addEventListener("click", retry);
    box.append(" ", button);
  }
}

function syncUrl(form: ScenarioForm): void {
  history.replaceState(null, "", `?${toQuery(form)}`);
}

async function runScenario(): Promise<void> {
  const form = readForm();
  const errors = validate(form);
  showErrors(errors);
  if (Object.keys(errors).length > 0) return;
  syncUrl(form);
  banner("");
  try {
    const response = await client.simulate(toRequest(form));
    const rows = comparisonRows(response);
    $("overlay-panel").innerHTML = overlayChart({
      startSlot: response.trace_excerpt.start_slot,
      intensities: response.trace_excerpt.intensities,
      series: overlaySeries(response),
    });
    $("bars-panel").innerHTML = comparisonBars(rows);
    $("warnings").textContent = response.warnings.join("; ");
  } catch (err) {
    if ((err as Error).name === "AbortError") return;
    const status = err instanceof ApiError ? ` (${err.status})` : "";
    banner(`scenario failed${status}: ${(err as Error).message}`, runScenario);
  }
}

async function runSweep(): Promise<void> {
  const form = readForm();
  const errors = validate(form);
  showErrors(errors);
  if (Object.keys(errors).length > 0) return;
  syncUrl(form);
  const lower = Math.ceil(form.lengthSlots);
  const upper = Math.max(lower, form.completionSlots);
  const step = Math.max(1, Math.round((upper * 3 - lower) / 8));
  const values: number[] = [];
  for (let t = lower; t <= upper * 3; t += step) values.push(t);
  try {
    const response = await client.sweep(toRequest(form), values);
    $("sweep-panel").innerHTML = sweepChart(sweepLines(response));
  } catch (err) {
    if ((err as Error).name === "AbortError") return;
    banner(`sweep failed: ${(err as Error).message}`, runSweep);
  }
}

async function boot(): Promise<void> {
  try {
    const regions = await client.regions();
    const select = fields.region();
    select.innerHTML = "";
    for (const info of regions) {
      const option = document.createElement("option");
      option.value = info.region;
      option.textContent = `${info.region} (mean ${info.mean.toFixed(0)}, cov ${info.cov.toFixed(2)})`;
      select.append(option);
    }
    const form = fromQuery(location.search);
    if (!form.region && regions.length > 0) form.region = regions[0].region;
    writeForm(form);
    showErrors(validate(readForm()));
  } catch (err) {
    banner(`cannot reach the advisor: ${(err as Error).message}`, boot);
  }
}

export function wire(): void {
  $("run-scenario").addEventListener("click", (event) => {
    event.preventDefault();
    void runScenario();
  });
  $("run-sweep").addEventListener("click", (event) => {
    event.preventDefault();
    void runSweep();
  });
  $("scenario-form").addEventListener("input", () => showErrors(validate(readForm())));
  void boot();
}

if (typeof document !== "undefined" && document.getElementById("scenario-form")) {
  wire();
}
