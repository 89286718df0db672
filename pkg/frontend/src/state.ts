// Scenario form model: validation mirrors the server-side job invariants
// so obviously-broken submissions are blocked with inline messages, and
// the whole form round-trips through the URL query string for sharing.

import type { SimulateRequest } from "./api.js";

export interface ScenarioForm {
  region: string;
  startOffset: number;
  lengthSlots: number;
  completionSlots: number;
  minServers: number;
  maxServers: number;
  curvePreset: string; // "custom" switches to customMc
  customMc: string; // comma-separated marginals, first must be 1
  policies: string[];
  seed: number;
  accounting: "prorated" | "whole_slot";
}

export const DEFAULT_FORM: ScenarioForm = {
  region: "",
  startOffset: 0,
  lengthSlots: 24,
  completionSlots: 36,
  minServers: 1,
  maxServers: 4,
  curvePreset: "resnet18",
  customMc: "1, 0.7",
  policies: ["greedy", "sr_deadline"],
  seed: 42,
  accounting: "prorated",
};

export type FieldErrors = Partial<Record<keyof ScenarioForm, string>>;

export function parseMc(text: string): number[] | null {
  const parts = text.split(",").map((p) => p.trim()).filter((p) => p.length > 0);
  if (parts.length === 0) return null;
  const values = parts.map(Number);
  if (values.some((v) => !Number.isFinite(v) || v <= 0)) return null;
  return values;
}

export function validate(form: ScenarioForm): FieldErrors {
  const errors: FieldErrors = {};
  if (!form.region) errors.region = "pick a region";
  if (form.startOffset < 0 || !Number.isInteger(form.startOffset)) {
    errors.startOffset = "start offset must be a whole slot number";
  }
  if (!(form.lengthSlots > 0)) errors.lengthSlots = "length must be positive";
  if (!Number.isInteger(form.completionSlots) || form.completionSlots < 1) {
    errors.completionSlots = "completion time must be a whole number of slots";
  } else if (form.completionSlots < form.lengthSlots) {
    errors.completionSlots = "completion time cannot be shorter than the job";
  }
  if (!Number.isInteger(form.minServers) || form.minServers < 1) {
    errors.minServers = "minimum servers must be at least 1";
  }
  if (!Number.isInteger(form.maxServers) || form.maxServers < form.minServers) {
    errors.maxServers = "maximum servers must be at least the minimum";
  }
  if (form.curvePreset === "custom") {
    const mc = parseMc(form.customMc);
    if (!mc) {
      errors.customMc = "marginals must be positive numbers";
    } else if (Math.abs(mc[0] - 1) > 1e-9) {
      errors.customMc = "the first marginal is the baseline and must be 1";
    } else if (mc.length !== form.maxServers - form.minServers + 1) {
      errors.customMc = `need ${form.maxServers - form.minServers + 1} values for servers ${form.minServers}..${form.maxServers}`;
    }
  }
  if (form.policies.length === 0) errors.policies = "pick at least one policy";
  if (!Number.isInteger(form.seed)) errors.seed = "seed must be an integer";
  return errors;
}

export function isValid(form: ScenarioForm): boolean {
  return Object.keys(validate(form)).length === 0;
}

export function toRequest(form: ScenarioForm): SimulateRequest {
  const curve =
    form.curvePreset === "custom"
      ? { mc: parseMc(form.customMc) ?? [] }
      : { preset: form.curvePreset };
  return {
    region: form.region,
    start_offset: form.startOffset,
    job: {
      length_slots: form.lengthSlots,
      min_servers: form.minServers,
      max_servers: form.maxServers,
      completion_slots: form.completionSlots,
    },
    curve,
    policies: form.policies,
    config: { accounting_mode: form.accounting, rng_seed: form.seed },
  };
}

export function toQuery(form: ScenarioForm): string {
  const params = new URLSearchParams();
  params.set("region", form.region);
  params.set("start", String(form.startOffset));
  params.set("l", String(form.lengthSlots));
  params.set("t", String(form.completionSlots));
  params.set("m", String(form.minServers));
  params.set("mmax", String(form.maxServers));
  params.set("curve", form.curvePreset);
  if (form.curvePreset === "custom") params.set("mc", form.customMc);
  params.set("policies", form.policies.join(","));
  params.set("seed", String(form.seed));
  params.set("acct", form.accounting);
  return params.toString();
}

export function fromQuery(query: string): ScenarioForm {
  const params = new URLSearchParams(query);
  const form = { ...DEFAULT_FORM, policies: [...DEFAULT_FORM.policies] };
  const num = (key: string, fallback: number) => {
    const raw = params.get(key);
    const value = raw === null ? NaN : Number(raw);
    return Number.isFinite(value) ? value : fallback;
  };
  if (params.has("region")) form.region = params.get("region")!;
  form.startOffset = num("start", form.startOffset);
  form.lengthSlots = num("l", form.lengthSlots);
  form.completionSlots = num("t", form.completionSlots);
  form.minServers = num("m", form.minServers);
  form.maxServers = num("mmax", form.maxServers);
  if (params.has("curve")) form.curvePreset = params.get("curve")!;
  if (params.has("mc")) form.customMc = params.get("mc")!;
  if (params.has("policies")) {
    form.policies = params.get("policies")!.split(",").filter((p) => p.length > 0);
  }
  form.seed = num("seed", form.seed);
  const acct = params.get("acct");
  if (acct === "prorated" || acct === "whole_slot") form.accounting = acct;
  return form;
}
