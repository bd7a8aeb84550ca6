/** Service client: every selection mutation round-trips through the HTTP
 * API and lands in the request log; the client never edits flags locally.
 * Mutations are queued so their responses apply strictly in order. */

import type {
  DeleteReport,
  FlagState,
  PlotKind,
  PlotPayload,
  SessionInfo,
  StructureView,
  ToolName,
  UndoReport,
} from './types.js';

export interface RequestRecord {
  method: 'GET' | 'POST';
  path: string;
  body?: unknown;
}

export type Transport = (record: RequestRecord) => Promise<unknown>;

export class ServiceUnreachableError extends Error {}

/** Transport speaking to a live service over fetch. */
export function httpTransport(baseUrl: string): Transport {
  return async (record) => {
    let response: Response;
    try {
      response = await fetch(baseUrl + record.path, {
        method: record.method,
        headers:
          record.body === undefined
            ? undefined
            : { 'Content-Type': 'application/json' },
        body: record.body === undefined ? undefined : JSON.stringify(record.body),
      });
    } catch (err) {
      throw new ServiceUnreachableError(String(err));
    }
    const payload = (await response.json()) as { error?: string };
    if (!response.ok) {
      throw new Error(payload.error ?? `HTTP ${response.status}`);
    }
    return payload;
  };
}

export class ServiceClient {
  /** Chronological record of every request issued; UI tests assert on it. */
  readonly log: RequestRecord[] = [];

  private mutationQueue: Promise<unknown> = Promise.resolve();

  constructor(
    private readonly transport: Transport,
    readonly session: string,
  ) {}

  static async open(
    transport: Transport,
    path?: string,
    model?: string,
  ): Promise<{ client: ServiceClient; info: SessionInfo }> {
    const params = new URLSearchParams();
    if (path !== undefined) params.set('path', path);
    if (model !== undefined) params.set('model', model);
    const query = params.toString();
    const record: RequestRecord = {
      method: 'GET',
      path: `/api/session${query ? `?${query}` : ''}`,
    };
    const info = (await transport(record)) as SessionInfo;
    const client = new ServiceClient(transport, info.session);
    client.log.push(record);
    return { client, info };
  }

  private async request<T>(record: RequestRecord): Promise<T> {
    this.log.push(record);
    return (await this.transport(record)) as T;
  }

  /** Reads may run concurrently. */
  getPlot(kind: PlotKind): Promise<PlotPayload> {
    return this.request({
      method: 'GET',
      path: `/api/plot/${kind}?session=${this.session}`,
    });
  }

  getStructure(frame: number): Promise<StructureView> {
    return this.request({
      method: 'GET',
      path: `/api/structure/${frame}?session=${this.session}`,
    });
  }

  /** Mutations are serialized client-side so responses apply in order. */
  private enqueue<T>(record: RequestRecord): Promise<T> {
    const next = this.mutationQueue.then(() => this.request<T>(record));
    this.mutationQueue = next.catch(() => undefined);
    return next;
  }

  applyTool(tool: ToolName, params: Record<string, unknown>): Promise<FlagState> {
    return this.enqueue({
      method: 'POST',
      path: '/api/tool',
      body: { session: this.session, tool, params },
    });
  }

  selectIds(ids: number[]): Promise<FlagState> {
    return this.applyTool('select_ids', { ids });
  }

  deselectIds(ids: number[]): Promise<FlagState> {
    return this.applyTool('deselect_ids', { ids });
  }

  deleteSelected(): Promise<DeleteReport> {
    return this.enqueue({
      method: 'POST',
      path: '/api/delete',
      body: { session: this.session },
    });
  }

  undo(): Promise<UndoReport> {
    return this.enqueue({
      method: 'POST',
      path: '/api/undo',
      body: { session: this.session },
    });
  }

  exportWhat(
    what: 'dataset' | 'descriptors' | 'frame_xyz' | 'projection',
    target: string,
    frame?: number,
  ): Promise<{ written: string }> {
    return this.enqueue({
      method: 'POST',
      path: '/api/export',
      body: { session: this.session, what, target, frame },
    });
  }
}
