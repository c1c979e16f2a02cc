export type Relation = "onset" | "consecutive" | "during" | "rest";

export const RELATIONS: Relation[] = ["onset", "consecutive", "during", "rest"];

export interface ExplanationEdge {
  src_id: string;
  dst_id: string;
  score: number;
}

export interface FeatureScore {
  name: string;
  score: number;
}

export interface ExplanationPayload {
  target_note_id: string;
  method: string;
  target_class: string;
  probs: number[];
  edges: Record<Relation, ExplanationEdge[]>;
  features: {
    target: FeatureScore[];
    node_totals: Record<string, number>;
  };
}

export interface GraphPayload {
  node_ids: string[];
  edges: Record<Relation, Array<[number, number]>>;
  feature_names: string[];
  features: number[];
  onsets: number[];
}

export interface PredictionEntry {
  class: string;
  probs: number[];
}

export interface PredictionsPayload {
  predictions: Record<string, PredictionEntry>;
}

export interface OverlayLine {
  src: string;
  dst: string;
  relation: Relation;
  score: number;
}
