// Typed client for the edit service. All endpoints wrap their payloads in
// {ok, data|error}; images travel as base64 PNG strings.

export interface StrokePayload {
  center: [number, number]; // (row, col) in image coordinates
  radius: number;
  tilt: [number, number]; // (dx, dy) surface tipping direction
  angle: number; // degrees at the falloff center
  strength: number; // 0..1
}

export interface SessionInfo {
  width: number;
  height: number;
  image_png: string;
  normals_png: string;
  rm_png: string;
  normal_ids: string[];
  rm_ids: string[];
}

interface Envelope<T> {
  ok: boolean;
  data?: T;
  error?: string;
}

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  const body = (await response.json()) as Envelope<T>;
  if (!response.ok || !body.ok || body.data === undefined) {
    throw new ServiceError(response.status, body.error ?? `HTTP ${response.status}`);
  }
  return body.data;
}

export class EditServiceClient {
  constructor(
    private baseUrl: string,
    private session: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return unwrap<T>(response);
  }

  async health(): Promise<{ status: string; sessions: string[] }> {
    return unwrap(await this.fetchImpl(`${this.baseUrl}/health`));
  }

  async sessionInfo(): Promise<SessionInfo> {
    return unwrap(await this.fetchImpl(`${this.baseUrl}/session/${this.session}`));
  }

  async paint(normalId: string, strokes: StrokePayload[]): Promise<string> {
    const data = await this.post<{ normal_id: string }>(`/paint/${this.session}`, {
      normal_id: normalId,
      strokes,
    });
    return data.normal_id;
  }

  async reshade(normalId: string): Promise<string> {
    const data = await this.post<{ preview_png: string }>(`/reshade/${this.session}`, {
      normal_id: normalId,
    });
    return data.preview_png;
  }

  async transfer(rmId: string): Promise<string> {
    const data = await this.post<{ preview_png: string; rm_id: string }>(
      `/transfer/${this.session}`,
      { rm_id: rmId },
    );
    return data.preview_png;
  }

  async rmThumbnail(rmId: string): Promise<string> {
    const data = await unwrap<{ rm_png: string }>(
      await this.fetchImpl(`${this.baseUrl}/rm/${this.session}/${encodeURIComponent(rmId)}`),
    );
    return data.rm_png;
  }
}
