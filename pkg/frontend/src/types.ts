// Wire types for the /v1 REST API and the asset interchange document.
// The document shapes mirror the server's golden file exactly; every field
// the server emits as a string stays a string here.

export type Mode = "Simple" | "Sequential" | "Dynamic";
export type QuestionType = "radio" | "checkbox" | "textbox" | "likert";
export type Frequency = "Low" | "Medium" | "High";
export type SensorName =
  | "Gyroscope"
  | "Location"
  | "Accelerometer"
  | "Light"
  | "Proximity"
  | "Noise";
export type AggregateFn = "sum" | "avg" | "max" | "min" | "count";

export interface SensorEntry {
  id: number;
  Name: SensorName;
}

export interface OptionEntry {
  id: number;
  Name: string;
  NextQuestion: number | null;
  Credits: string;
}

export interface SampleDataEntry {
  id: number;
  Question: string;
  Type: QuestionType;
  Latitude: string;
  Longitude: string;
  Sensor: SensorEntry[];
  Time: string;
  Frequency: Frequency;
  Sequence: string;
  Visibility: string;
  Mandatory: string;
  Option: OptionEntry[];
  Combination: null;
  Vicinity: string;
}

export interface StartAndDestinationModel {
  StartLatitude: number | null;
  StartLongitude: number | null;
  DestinationLatitude: number | null;
  DestinationLongitude: number | null;
  Mode: Mode;
  DefaultCredit: string;
}

export interface InterchangeDocument {
  Id: string;
  Name: string;
  Url: string;
  Metadata: {
    record: {
      StartAndDestinationModel: StartAndDestinationModel;
      SampleDataModel: SampleDataEntry[];
    };
  };
}

// ---- API responses ----

export interface Finding {
  path: string;
  message: string;
}

export interface UploadResult {
  id: string;
  findings: Finding[];
}

export interface AggregateReading {
  fn: AggregateFn;
  value: number | null;
  count: number;
  updated_at: number;
}

export interface SessionView {
  session_id: string;
  participant_id: string;
  statuses: Record<string, string>;
  credits: number;
  completed: boolean;
}

export interface ZoneEvent {
  kind: "Entered" | "Left";
  question_id: number;
}
