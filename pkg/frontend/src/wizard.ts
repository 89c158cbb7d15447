// Multi-step asset builder. The wizard composes an interchange document
// from map clicks and per-POI forms; it never invents semantics of its own —
// the saved document is validated by the server, and server findings are
// mapped back onto wizard fields.

import type { ApiClient } from "./api.js";
import type {
  Finding,
  Frequency,
  InterchangeDocument,
  Mode,
  OptionEntry,
  QuestionType,
  SampleDataEntry,
  SensorName,
  UploadResult,
} from "./types.js";

export const WIZARD_STEPS = [
  "meta",
  "map",
  "questions",
  "sensing",
  "review",
] as const;
export type WizardStep = (typeof WIZARD_STEPS)[number];

export interface PoiDraft {
  id: number;
  lat: string;
  lon: string;
  question: string;
  type: QuestionType;
  mandatory: boolean;
  options: OptionEntry[];
  sensors: SensorName[];
  timeMin: string;
  frequency: Frequency;
  vicinity: string;
}

export interface MetaDraft {
  id: string;
  name: string;
  url: string;
  mode: Mode;
  defaultCredit: string;
}

const CHOICE_TYPES: QuestionType[] = ["radio", "checkbox", "likert"];

export class AssetWizard {
  meta: MetaDraft = {
    id: "",
    name: "",
    url: "",
    mode: "Simple",
    defaultCredit: "3",
  };
  pois: PoiDraft[] = [];
  step: WizardStep = "meta";
  selectedPoi: number | null = null;

  /** Map click handler: drop a POI marker and select it. */
  placePoi(lat: number, lon: number): PoiDraft {
    const id = this.pois.length
      ? Math.max(...this.pois.map((p) => p.id)) + 1
      : 1;
    const poi: PoiDraft = {
      id,
      lat: String(lat),
      lon: String(lon),
      question: "",
      type: "radio",
      mandatory: true,
      options: [],
      sensors: [],
      timeMin: "3",
      frequency: "Medium",
      vicinity: "25",
    };
    this.pois.push(poi);
    this.selectedPoi = id;
    return poi;
  }

  removePoi(id: number): void {
    this.pois = this.pois.filter((p) => p.id !== id);
    if (this.selectedPoi === id) this.selectedPoi = null;
  }

  poi(id: number): PoiDraft {
    const found = this.pois.find((p) => p.id === id);
    if (!found) throw new Error(`no POI ${id}`);
    return found;
  }

  configureQuestion(id: number, patch: Partial<Omit<PoiDraft, "id">>): void {
    Object.assign(this.poi(id), patch);
  }

  addOption(
    poiId: number,
    name: string,
    nextQuestion: number | null = null,
    credits = "",
  ): OptionEntry {
    const poi = this.poi(poiId);
    const option: OptionEntry = {
      id: poi.options.length
        ? Math.max(...poi.options.map((o) => o.id)) + 1
        : 1,
      Name: name,
      NextQuestion: nextQuestion,
      Credits: credits,
    };
    poi.options.push(option);
    return option;
  }

  /** Dynamic-mode helper for the option -> next-question graph view. */
  optionGraph(): Array<{ from: number; option: number; to: number | null }> {
    const edges: Array<{ from: number; option: number; to: number | null }> = [];
    for (const poi of this.pois) {
      for (const o of poi.options) {
        edges.push({ from: poi.id, option: o.id, to: o.NextQuestion });
      }
    }
    return edges;
  }

  /** Structural problems that block advancing past the current step.
   * Anything deeper (ranges, reachability) is the server's verdict. */
  stepErrors(): string[] {
    const errors: string[] = [];
    switch (this.step) {
      case "meta":
        if (!this.meta.name) errors.push("meta.name: required");
        if (!/^\d+$/.test(this.meta.defaultCredit)) {
          errors.push("meta.defaultCredit: must be a whole number");
        }
        break;
      case "map":
        if (this.pois.length === 0) errors.push("map: place at least one POI");
        break;
      case "questions":
        for (const poi of this.pois) {
          if (!poi.question) errors.push(`poi ${poi.id}: question text required`);
          if (CHOICE_TYPES.includes(poi.type) && poi.options.length === 0) {
            errors.push(`poi ${poi.id}: ${poi.type} needs options`);
          }
          const ids = new Set(this.pois.map((p) => p.id));
          for (const o of poi.options) {
            if (o.NextQuestion !== null && !ids.has(o.NextQuestion)) {
              errors.push(
                `poi ${poi.id} option ${o.id}: next question ` +
                  `${o.NextQuestion} does not exist`,
              );
            }
          }
        }
        break;
      case "sensing":
        for (const poi of this.pois) {
          if (!/^\d+(\.\d+)?$/.test(poi.vicinity)) {
            errors.push(`poi ${poi.id}: vicinity must be a number`);
          }
          if (poi.sensors.length > 0 && !/^\d+(\.\d+)?$/.test(poi.timeMin)) {
            errors.push(`poi ${poi.id}: sensing duration must be a number`);
          }
        }
        break;
      case "review":
        break;
    }
    return errors;
  }

  canAdvance(): boolean {
    return this.stepErrors().length === 0;
  }

  next(): WizardStep {
    const errors = this.stepErrors();
    if (errors.length > 0) {
      throw new Error(`step "${this.step}" incomplete: ${errors.join("; ")}`);
    }
    const i = WIZARD_STEPS.indexOf(this.step);
    this.step = WIZARD_STEPS[Math.min(i + 1, WIZARD_STEPS.length - 1)]!;
    return this.step;
  }

  back(): WizardStep {
    const i = WIZARD_STEPS.indexOf(this.step);
    this.step = WIZARD_STEPS[Math.max(i - 1, 0)]!;
    return this.step;
  }

  buildDocument(): InterchangeDocument {
    const sample: SampleDataEntry[] = [...this.pois]
      .sort((a, b) => a.id - b.id)
      .map((poi) => ({
        id: poi.id,
        Question: poi.question,
        Type: poi.type,
        Latitude: poi.lat,
        Longitude: poi.lon,
        Sensor: poi.sensors.map((name, i) => ({ id: i + 1, Name: name })),
        Time: poi.timeMin,
        Frequency: poi.frequency,
        Sequence: "Disable",
        Visibility: "true",
        Mandatory: poi.mandatory ? "true" : "false",
        Option: poi.options.map((o) => ({ ...o })),
        Combination: null,
        Vicinity: poi.vicinity,
      }));
    return {
      Id: this.meta.id,
      Name: this.meta.name,
      Url: this.meta.url,
      Metadata: {
        record: {
          StartAndDestinationModel: {
            StartLatitude: null,
            StartLongitude: null,
            DestinationLatitude: null,
            DestinationLongitude: null,
            Mode: this.meta.mode,
            DefaultCredit: this.meta.defaultCredit,
          },
          SampleDataModel: sample,
        },
      },
    };
  }

  serialize(): string {
    return JSON.stringify(this.buildDocument(), null, 2);
  }

  /** Reconstruct wizard state from a previously saved document. */
  static fromDocument(doc: InterchangeDocument): AssetWizard {
    const wizard = new AssetWizard();
    const model = doc.Metadata.record.StartAndDestinationModel;
    wizard.meta = {
      id: doc.Id,
      name: doc.Name,
      url: doc.Url,
      mode: model.Mode,
      defaultCredit: String(model.DefaultCredit),
    };
    wizard.pois = doc.Metadata.record.SampleDataModel.map((q) => ({
      id: q.id,
      lat: String(q.Latitude),
      lon: String(q.Longitude),
      question: q.Question,
      type: q.Type,
      mandatory: String(q.Mandatory) === "true",
      options: q.Option.map((o) => ({ ...o })),
      sensors: q.Sensor.map((s) => s.Name),
      timeMin: String(q.Time),
      frequency: q.Frequency,
      vicinity: String(q.Vicinity),
    }));
    wizard.step = "review";
    return wizard;
  }

  /** POST the document; on findings, map each one to the offending field. */
  async save(
    api: ApiClient,
    projectId: string,
    t?: number,
  ): Promise<{ assetId: string; fieldErrors: Map<string, string> }> {
    const result: UploadResult = await api.uploadAsset(
      projectId,
      this.serialize(),
      t,
    );
    return { assetId: result.id, fieldErrors: mapFindings(result.findings) };
  }
}

/** Translate server finding paths (e.g. "SampleDataModel[0].Option[1]")
 * onto wizard field keys like "poi.1.option.2". */
export function mapFindings(findings: Finding[]): Map<string, string> {
  const out = new Map<string, string>();
  for (const f of findings) {
    const m = /SampleDataModel\[(\d+)\](?:\.Option\[(\d+)\])?/.exec(f.path);
    let key = f.path || "document";
    if (m) {
      key = `poi.${Number(m[1]) + 1}`;
      if (m[2] !== undefined) key += `.option.${Number(m[2]) + 1}`;
    }
    out.set(key, out.has(key) ? `${out.get(key)}; ${f.message}` : f.message);
  }
  return out;
}
