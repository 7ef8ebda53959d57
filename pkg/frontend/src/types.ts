/** Wire types mirroring the review service payloads. */

export type Channel = "semantic" | "phonetic" | "visual";

export interface Category {
  id: string;
  channel: Channel;
  name: string;
  definition: string;
  level_path: string[];
  examples: string[];
}

export interface Codebook {
  version: string;
  categories: Category[];
}

export interface Progress {
  total: number;
  pending: number;
  resolved: number;
  skipped: number;
}

export interface ItemSummary {
  item_id: string;
  record_id: string;
  task: string;
  status: string;
  /** null for ensemble-failed records (no provisional consensus exists) */
  consistency: number | null;
  provisional_label: unknown;
  n_votes: number;
  n_failures: number;
  context: Record<string, unknown>;
}

export interface QueueResponse {
  items: ItemSummary[];
  progress: Progress;
}

export interface VoteDetail {
  annotator_id: string;
  value: unknown;
  raw_text: string;
}

export interface ItemDetail extends Omit<ItemSummary, "consistency" | "provisional_label"> {
  votes: { votes: VoteDetail[]; failures: [string, string][] };
  provisional: { label: unknown; consistency: number } | null;
}

export interface ResolutionForm {
  reviewer_id: string;
  final_name: string | null;
  final_explanation: string | null;
  final_labels: Record<string, string | null>;
  rule_tag?: number | null;
  decided_at?: string;
}

export interface ExistingResolution extends ResolutionForm {
  item_id: string;
}

export type SubmitStatus =
  | { kind: "resolved" }
  | { kind: "unchanged" }
  | { kind: "in_flight" }
  | { kind: "invalid"; errors: string[] }
  | { kind: "conflict"; existing: ExistingResolution | null };
