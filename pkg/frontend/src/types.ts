// Payload shapes of the assessment service API. Field names mirror the wire
// format exactly; the client renders only what role-scoped payloads contain.

export type RatingLetter = "N" | "P" | "F";

export const CARD_DECK: RatingLetter[] = ["N", "P", "F"];

export const CARD_LABELS: Record<RatingLetter, string> = {
  N: "Not achieved",
  P: "Partially achieved",
  F: "Fully achieved",
};

export type Phase =
  | "planning"
  | "collecting"
  | "generating"
  | "reporting"
  | "closed";

export type RoleName = "sponsor" | "moderator" | "assessor";

export interface Participant {
  id: string;
  display_name: string;
  role: RoleName;
}

export interface PreviousRound {
  round_number: number;
  votes: Record<string, RatingLetter>;
  justifications: Record<string, string>;
}

export interface CurrentItemView {
  indicator_id: number;
  round_number: number;
  revealed: boolean;
  votes_expected: number;
  votes_cast: number;
  expected_voters: string[];
  your_vote?: RatingLetter | null;
  voted?: string[];
  votes?: Record<string, RatingLetter>;
  justifications?: Record<string, string>;
  unanimous?: RatingLetter | null;
  previous_rounds: PreviousRound[];
}

export interface SessionView {
  session_id: string;
  phase: Phase;
  organization: string;
  model_version: string;
  round_cap: number;
  your_id: string;
  your_role: RoleName;
  participants: Participant[];
  progress: { resolved: number; total: number };
  items: Record<string, { consensus: RatingLetter | null; evidence: string[]; rounds: number }>;
  current_item: CurrentItemView | null;
}

export interface StreamEvent {
  seq: number;
  timestamp: string;
  type: string;
  payload: Record<string, unknown>;
}

export interface Indicator {
  id: number;
  sub_process: string;
  practice: string;
  description: string;
  statement: string;
  techniques: string[];
  work_products: string[];
}

export interface SubProcess {
  id: string;
  title: string;
  purpose: string;
  outcomes: string[];
}

export interface ReferenceModel {
  version: string;
  sub_processes: SubProcess[];
  indicators: Indicator[];
  glossary: { term: string; definition: string }[];
}

export interface ProfileCell {
  score: string;
  display: string;
  rating: RatingLetter;
}

export interface ProcessProfile {
  model_version: string;
  overall: ProfileCell;
  sub_processes: Record<string, ProfileCell>;
  capability_level: number;
}

export interface ResponseSheet {
  model_version: string;
  respondent_label: string;
  ratings: Record<string, RatingLetter>;
}

export interface ResultsDocument {
  sheet: ResponseSheet;
  profile: ProcessProfile;
  results: {
    profile: ProcessProfile;
    strengths: { indicator_id: number; statement: string }[];
    weaknesses: { indicator_id: number; statement: string; rating: RatingLetter }[];
    improvement_opportunities: { indicator_id: number; focus: string }[];
    evidence_index: Record<string, string[]>;
    metadata: Record<string, unknown>;
  };
}
