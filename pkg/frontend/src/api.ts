// Annotation API client with an offline submission queue.
//
// Submits POST /api/annotate bodies; when the network is down the payload
// is queued in storage and flushed on reconnect. Server rejections (4xx)
// are surfaced to the caller and never re-queued, except 409 duplicates,
// which count as already-delivered.

import type {
  AnnotationPayload,
  NextResponse,
  ProgressResponse,
  SessionResponse,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown>; text(): Promise<string> }>;

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class MemoryStorage implements StorageLike {
  private data = new Map<string, string>();
  getItem(key: string): string | null {
    return this.data.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }
  removeItem(key: string): void {
    this.data.delete(key);
  }
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`api error ${status}: ${detail}`);
  }
}

const QUEUE_KEY = "kgrex_offline_queue";

export class OfflineQueue {
  constructor(private storage: StorageLike) {}

  load(): AnnotationPayload[] {
    const raw = this.storage.getItem(QUEUE_KEY);
    return raw ? (JSON.parse(raw) as AnnotationPayload[]) : [];
  }

  private save(queue: AnnotationPayload[]): void {
    if (queue.length === 0) {
      this.storage.removeItem(QUEUE_KEY);
    } else {
      this.storage.setItem(QUEUE_KEY, JSON.stringify(queue));
    }
  }

  push(payload: AnnotationPayload): void {
    const queue = this.load();
    queue.push(payload);
    this.save(queue);
  }

  size(): number {
    return this.load().length;
  }

  /** Remove and return the pending payloads, leaving the queue empty. */
  drain(): AnnotationPayload[] {
    const queue = this.load();
    this.save([]);
    return queue;
  }

  requeue(payloads: AnnotationPayload[]): void {
    const queue = payloads.concat(this.load());
    this.save(queue);
  }
}

export class ApiClient {
  readonly queue: OfflineQueue;

  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = fetch as unknown as FetchLike,
    storage: StorageLike = new MemoryStorage(),
  ) {
    this.queue = new OfflineQueue(storage);
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as T;
  }

  openSession(annotatorId: string, token?: string): Promise<SessionResponse> {
    return this.request("POST", "/api/session", {
      annotator_id: annotatorId,
      ...(token ? { token } : {}),
    });
  }

  fetchNext(sessionId: string): Promise<NextResponse> {
    return this.request(
      "GET",
      `/api/next?session_id=${encodeURIComponent(sessionId)}`,
    );
  }

  progress(sessionId: string): Promise<ProgressResponse> {
    return this.request(
      "GET",
      `/api/progress?session_id=${encodeURIComponent(sessionId)}`,
    );
  }

  /**
   * Submit one annotation. Network failures queue the payload for a later
   * flush and resolve as {queued: true}; HTTP 409 resolves as delivered.
   */
  async submit(
    payload: AnnotationPayload,
  ): Promise<{ ok: boolean; queued: boolean; duplicate?: boolean }> {
    try {
      await this.request("POST", "/api/annotate", payload);
      return { ok: true, queued: false };
    } catch (error) {
      if (error instanceof ApiError) {
        if (error.status === 409) {
          return { ok: true, queued: false, duplicate: true };
        }
        throw error; // validation errors surface to the form
      }
      this.queue.push(payload);
      return { ok: false, queued: true };
    }
  }

  /** Deliver queued submissions; re-queues whatever still cannot be sent. */
  async flushQueue(): Promise<number> {
    const pending = this.queue.drain();
    let delivered = 0;
    const still: AnnotationPayload[] = [];
    for (const payload of pending) {
      try {
        await this.request("POST", "/api/annotate", payload);
        delivered += 1;
      } catch (error) {
        if (error instanceof ApiError) {
          if (error.status === 409) {
            delivered += 1; // already stored server-side
            continue;
          }
          throw error;
        }
        still.push(payload);
      }
    }
    if (still.length) this.queue.requeue(still);
    return delivered;
  }
}
