// Typed client for the middleware management API. Every number the console
// shows comes straight out of these response payloads; the console itself
// never computes an estimate.

export type Destination = "local" | "private" | "public";
export type ServiceClass = "storage" | "software" | "processing";
export type QosTier = "bronze" | "silver" | "gold";

export interface JobProfileBody {
  fileSizeGb: number;
  downloadsPerHour: number;
  users: number;
  frameRateMbps: number;
  encodingsPerWeek: number;
  hoursPerEncoding: number;
  hoursPerWeek: number;
  bandwidthMbps: number;
}

export interface PolicyBody {
  securityLevel: number;
  qos: QosTier;
  budget: number;
  availability: number;
}

export interface JobEntry {
  id: string;
  name: string;
  dept: string;
  class: ServiceClass;
  frequency: string;
  profile: JobProfileBody;
  policy: PolicyBody;
  destination: { type: Destination; server?: string };
  audit: { confirmedBy: string; confirmedAt: string };
}

export interface EstimateBreakdown {
  destination: Destination;
  value: number;
  combine: "sum" | "product";
  terms: Record<string, number>;
}

export interface Advisory {
  serviceClass: ServiceClass;
  component: "transport" | "storage" | "processing";
  deployment: "public" | "private";
  significance: "never" | "conditional" | "always";
  condition: string;
  triggered: boolean;
}

export interface OfferInfo {
  offerId: string;
  cspId: string;
  class: ServiceClass;
  price: number;
  qos: QosTier;
  availability: number;
  carbonRate?: number;
}

export interface EstimateResponse {
  jobId: string;
  registryRevision: number;
  estimates: Record<Destination, EstimateBreakdown>;
  compliant: Destination[];
  recommendation: Destination;
  rationale: string[];
  advisories: Advisory[];
  offer?: OfferInfo;
}

export interface JobsResponse {
  registryRevision: number;
  jobs: JobEntry[];
}

export interface InfrastructureResponse {
  registryRevision: number;
  infrastructure: {
    machines: { id: string; powerW: number; diskGb: number; diskPowerW: number }[];
    servers: {
      id: string; function: string; frequency: string; mode: string;
      capacityMbps: number; powerW: number; diskGb: number; diskPowerW: number; users: number;
    }[];
    paths: Record<string, { name: string; powerW: number; capacityMbps: number }[]>;
    coefficients: { contentServerJPerMb: number; transportOverrideJPerMb: number | null };
    thresholds: Record<string, number>;
  };
}

export interface EstimateOverrides {
  profile?: Partial<JobProfileBody>;
  policy?: PolicyBody;
  atHour?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (error) {
      throw new ApiError(0, "UNREACHABLE", `service unreachable: ${String(error)}`);
    }
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail = (payload as { error?: { code?: string; message?: string } }).error ?? {};
      throw new ApiError(response.status, detail.code ?? "ERROR", detail.message ?? response.statusText);
    }
    return payload as T;
  }

  health(): Promise<{ status: string; registryRevision: number; eventCount: number }> {
    return this.request("GET", "/health");
  }

  jobs(): Promise<JobsResponse> {
    return this.request("GET", "/jobs");
  }

  job(id: string): Promise<{ registryRevision: number; entry: JobEntry }> {
    return this.request("GET", `/jobs/${encodeURIComponent(id)}`);
  }

  estimate(id: string, overrides: EstimateOverrides = {}): Promise<EstimateResponse> {
    return this.request("POST", `/jobs/${encodeURIComponent(id)}/estimate`, overrides);
  }

  confirmDestination(
    id: string,
    destination: Destination,
    options: { server?: string; confirmedBy?: string; ifRevision?: number } = {},
  ): Promise<{ registryRevision: number; entry: JobEntry }> {
    return this.request("PUT", `/jobs/${encodeURIComponent(id)}/destination`, {
      type: destination,
      ...(options.server !== undefined ? { server: options.server } : {}),
      ...(options.confirmedBy !== undefined ? { confirmedBy: options.confirmedBy } : {}),
      ...(options.ifRevision !== undefined ? { ifRevision: options.ifRevision } : {}),
    });
  }

  infrastructure(): Promise<InfrastructureResponse> {
    return this.request("GET", "/infrastructure");
  }

  putInfrastructure(body: InfrastructureResponse["infrastructure"]): Promise<{ registryRevision: number }> {
    return this.request("PUT", "/infrastructure", body);
  }

  brokerSelect(body: {
    class: ServiceClass; budget: number; qos?: QosTier; availability?: number; atHour?: number;
  }): Promise<{ offer: OfferInfo; atHour: number }> {
    return this.request("POST", "/broker/select", body);
  }
}
