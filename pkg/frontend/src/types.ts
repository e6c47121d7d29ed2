/** DTOs mirroring the review service's JSON bodies. */

export interface ReviewItem {
  qa_id: string;
  question: string;
  answer: string;
  aggregate_entailment: number;
  cluster: number | null;
  source_id: string;
  revision: number;
}

export interface QueuePage {
  items: ReviewItem[];
  page: number;
  page_size: number;
  remaining: number;
}

export type DecisionKind = "accept" | "reject" | "edit";

export interface DecisionRequest {
  decision: DecisionKind;
  reviewer: string;
  expected_revision: number;
  edited_answer?: string;
}

export interface DecisionResponse {
  qa_id: string;
  decision: DecisionKind;
  reviewer: string;
  decided_at: string;
  revision: number;
}

export interface ServerStats {
  retention: { retention_rate: number } | null;
  split_sizes: Record<string, number> | null;
  review: {
    queue_remaining: number;
    decided: number;
    accepted: number;
    rejected: number;
    edited: number;
  };
}

export interface ApiError {
  error: string;
  detail: string;
}
