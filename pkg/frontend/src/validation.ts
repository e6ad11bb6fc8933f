// Client-side mirror of the server's job/policy invariants, for responsive
// forms. Server responses stay authoritative; anything accepted here can
// still be rejected with a 422.

import type { JobProfileBody, PolicyBody, ServiceClass } from "./api.js";

export interface JobForm {
  id: string;
  class: ServiceClass;
  profile: JobProfileBody;
  policy: PolicyBody;
}

export type FieldErrors = Record<string, string>;

const CLASS_REQUIRED: Record<ServiceClass, (keyof JobProfileBody)[]> = {
  storage: ["fileSizeGb", "downloadsPerHour", "users"],
  software: ["frameRateMbps", "fileSizeGb"],
  processing: ["encodingsPerWeek", "hoursPerEncoding", "hoursPerWeek"],
};

export function validateJobForm(form: JobForm): FieldErrors {
  const errors: FieldErrors = {};
  if (!form.id.trim()) {
    errors["id"] = "job id is required";
  }
  for (const [field, value] of Object.entries(form.profile)) {
    if (!Number.isFinite(value) || value < 0) {
      errors[field] = "must be a number >= 0";
    }
  }
  if (form.profile.hoursPerWeek > 168) {
    errors["hoursPerWeek"] = "a week has at most 168 hours";
  }
  for (const field of ["users", "encodingsPerWeek"] as const) {
    if (Number.isFinite(form.profile[field]) && !Number.isInteger(form.profile[field])) {
      errors[field] = "must be a whole number";
    }
  }
  for (const field of CLASS_REQUIRED[form.class]) {
    if (!(form.profile[field] > 0) && !(field in errors)) {
      errors[field] = `required for a ${form.class} job`;
    }
  }
  if (![1, 2, 3].includes(form.policy.securityLevel)) {
    errors["securityLevel"] = "security level is 1, 2 or 3";
  }
  if (!["bronze", "silver", "gold"].includes(form.policy.qos)) {
    errors["qos"] = "qos tier is bronze, silver or gold";
  }
  if (!Number.isFinite(form.policy.budget) || form.policy.budget < 0) {
    errors["budget"] = "budget must be >= 0";
  }
  if (!(form.policy.availability >= 0 && form.policy.availability <= 1)) {
    errors["availability"] = "availability is a fraction between 0 and 1";
  }
  return errors;
}

export function isValid(form: JobForm): boolean {
  return Object.keys(validateJobForm(form)).length === 0;
}
