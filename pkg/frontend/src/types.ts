// Wire types of the review service REST API. The server is the single
// source of truth; the client never recomputes scores.

export type TaskKind = "annotation-review" | "inclusion-survey" | "quality-survey";

export type InclusionAnswer = "both" | "either" | "none";

export type CorrectionField = "race" | "age" | "gender" | "relevance" | "quality";

/** Annotation values as served: "-" marks unlabeled. */
export type AnnotationValue = string | number;

export interface ReviewTask {
  task_id: string;
  kind: TaskKind;
  image_set: string[];
  context: { query: string; conditioned_value: string | null };
  current_labels: Record<string, AnnotationValue | null> | null;
}

export interface Meta {
  attribute: { name: string; values: string[] };
  queries: string[];
  gender_categories: string[];
  age_range: [number, number] | null;
  set_size: number;
  n_records: number;
}

export interface CorrectionSubmission {
  reviewer_id: string;
  image_id: string;
  field: CorrectionField;
  new_value: AnnotationValue | null;
  old_value?: AnnotationValue | null;
  event_id: string;
}

export interface SurveySubmission {
  respondent_id: string;
  declared_value: string;
  declared_age?: number;
  declared_gender?: string;
  task_id: string;
  answer?: InclusionAnswer;
  selected_count?: number;
  event_id: string;
}

export interface Acknowledgment {
  status: "accepted" | "duplicate";
  event_id: string;
}

export interface RespondentProfile {
  respondentId: string;
  declaredValue: string;
  declaredAge?: number;
  declaredGender?: string;
}
