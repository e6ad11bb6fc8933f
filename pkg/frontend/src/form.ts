// What-if form: the selected job's profile and policy, editable as
// transient overrides. Client-side validation mirrors the server's
// invariants for responsiveness and gates the estimate button; server
// responses stay authoritative and a 422 renders inline without losing
// the form state.

import { ApiClient, ApiError } from "./api.js";
import type { EstimateResponse, JobEntry, JobProfileBody, PolicyBody, QosTier } from "./api.js";
import { validateJobForm } from "./validation.js";

const PROFILE_FIELDS: (keyof JobProfileBody)[] = [
  "fileSizeGb", "downloadsPerHour", "users", "frameRateMbps",
  "encodingsPerWeek", "hoursPerEncoding", "hoursPerWeek", "bandwidthMbps",
];

export interface FormHandlers {
  onEstimate?: (response: EstimateResponse) => void;
  onBanner?: (message: string) => void;
}

export class JobWhatIfForm {
  private entry: JobEntry | null = null;
  private form: HTMLFormElement | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly handlers: FormHandlers = {},
  ) {}

  load(entry: JobEntry): void {
    this.entry = entry;
    const form = document.createElement("form");
    form.className = "whatif-form";
    this.form = form;

    const title = document.createElement("h3");
    title.textContent = `${entry.id} (${entry.class})`;
    form.appendChild(title);

    for (const field of PROFILE_FIELDS) {
      form.appendChild(this.numberField(field, entry.profile[field]));
    }
    form.appendChild(this.numberField("securityLevel", entry.policy.securityLevel));
    form.appendChild(this.qosField(entry.policy.qos));
    form.appendChild(this.numberField("budget", entry.policy.budget));
    form.appendChild(this.numberField("availability", entry.policy.availability));

    const submit = document.createElement("button");
    submit.type = "submit";
    submit.className = "estimate";
    submit.textContent = "estimate";
    form.appendChild(submit);

    const serverError = document.createElement("p");
    serverError.className = "server-error";
    serverError.hidden = true;
    form.appendChild(serverError);

    form.addEventListener("input", () => this.revalidate());
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });

    this.root.replaceChildren(form);
    this.revalidate();
  }

  private numberField(name: string, value: number): HTMLElement {
    const label = document.createElement("label");
    label.textContent = name;
    const input = document.createElement("input");
    input.name = name;
    input.type = "number";
    input.step = "any";
    input.value = String(value);
    const error = document.createElement("small");
    error.className = "field-error";
    error.dataset.for = name;
    error.hidden = true;
    label.append(input, error);
    return label;
  }

  private qosField(value: QosTier): HTMLElement {
    const label = document.createElement("label");
    label.textContent = "qos";
    const select = document.createElement("select");
    select.name = "qos";
    for (const tier of ["bronze", "silver", "gold"]) {
      const option = document.createElement("option");
      option.value = tier;
      option.textContent = tier;
      option.selected = tier === value;
      select.appendChild(option);
    }
    label.appendChild(select);
    return label;
  }

  private read(): { profile: JobProfileBody; policy: PolicyBody } | null {
    if (!this.form) {
      return null;
    }
    const number = (name: string) =>
      Number(this.form!.querySelector<HTMLInputElement>(`[name="${name}"]`)?.value ?? "");
    const profile = Object.fromEntries(
      PROFILE_FIELDS.map((field) => [field, number(field)]),
    ) as unknown as JobProfileBody;
    const policy: PolicyBody = {
      securityLevel: number("securityLevel"),
      qos: (this.form.querySelector<HTMLSelectElement>('[name="qos"]')?.value ?? "bronze") as QosTier,
      budget: number("budget"),
      availability: number("availability"),
    };
    return { profile, policy };
  }

  revalidate(): Record<string, string> {
    if (!this.form || !this.entry) {
      return {};
    }
    const state = this.read()!;
    const errors = validateJobForm({
      id: this.entry.id,
      class: this.entry.class,
      profile: state.profile,
      policy: state.policy,
    });
    for (const node of this.form.querySelectorAll<HTMLElement>(".field-error")) {
      const message = errors[node.dataset.for ?? ""];
      node.hidden = message === undefined;
      node.textContent = message ?? "";
    }
    const submit = this.form.querySelector<HTMLButtonElement>("button.estimate");
    if (submit) {
      submit.disabled = Object.keys(errors).length > 0;
    }
    return errors;
  }

  async submit(): Promise<void> {
    if (!this.form || !this.entry) {
      return;
    }
    if (Object.keys(this.revalidate()).length > 0) {
      return; // the submit button is disabled; belt and braces
    }
    const state = this.read()!;
    const serverError = this.form.querySelector<HTMLElement>(".server-error")!;
    serverError.hidden = true;
    try {
      const response = await this.api.estimate(this.entry.id, {
        profile: state.profile,
        policy: state.policy,
      });
      this.handlers.onEstimate?.(response);
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        serverError.hidden = false;
        serverError.textContent = error.message;
        return; // form state untouched
      }
      if (error instanceof ApiError) {
        this.handlers.onBanner?.(error.message);
        return; // unreachable or server-side failure; keep the form
      }
      throw error;
    }
  }
}
