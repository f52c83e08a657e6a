/** Wire types mirroring the review service JSON API. */

export type ItemStatus = "pending" | "approved" | "rejected" | "relabelled";

export interface ItemSummary {
  id: number;
  ensemble_label: 0 | 1;
  score_attack: number;
  score_benign: number;
  margin: number;
  status: ItemStatus;
}

export interface QueuePage {
  total: number;
  page: number;
  page_size: number;
  items: ItemSummary[];
}

export interface Contribution {
  feature: string;
  weight: number;
}

export interface Explanation {
  intercept: number;
  local_fit_r2: number;
  contributions: Contribution[];
}

export interface ItemDetail extends ItemSummary {
  features: Record<string, number>;
  explanation: Explanation | null;
  decided_label: number | null;
}

export interface Progress {
  total: number;
  decided: number;
  pending: number;
  approved: number;
  rejected: number;
  relabelled: number;
}

export type DecisionAction = "approve" | "reject" | "relabel";

export interface DecisionRequest {
  action: DecisionAction;
  label?: 0 | 1;
}

export interface DecisionResponse {
  status: "recorded" | "unchanged";
  item: ItemSummary;
}

export interface FinalizeResponse {
  size: number;
  mode: string;
  path: string | null;
}

export interface AppNotice {
  kind: "info" | "error" | "conflict";
  text: string;
}
