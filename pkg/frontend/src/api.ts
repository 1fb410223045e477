/**
 * Client for the description service. One in-flight request per image:
 * rapid re-clicks coalesce onto the pending promise.
 */

import type { DescribeOptions, DescribeResponse, PageSnapshot } from "./types";

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status: number | null,
    readonly retryable: boolean,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class DescribeClient {
  private inflight = new Map<string, Promise<DescribeResponse>>();

  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  describe(
    snapshot: PageSnapshot,
    imageKey: string,
    options: DescribeOptions = {},
  ): Promise<DescribeResponse> {
    const pending = this.inflight.get(imageKey);
    if (pending) return pending;
    const promise = this.post(snapshot, options).finally(() => {
      this.inflight.delete(imageKey);
    });
    this.inflight.set(imageKey, promise);
    return promise;
  }

  private async post(
    snapshot: PageSnapshot,
    options: DescribeOptions,
  ): Promise<DescribeResponse> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl.replace(/\/$/, "")}/describe`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ snapshot, options }),
      });
    } catch (err) {
      throw new ServiceError(`description service unreachable: ${err}`, null, true);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // keep the status text
      }
      // Validation problems are diagnostic; server/transport problems invite a retry.
      throw new ServiceError(detail, response.status, response.status >= 500);
    }
    return (await response.json()) as DescribeResponse;
  }
}
