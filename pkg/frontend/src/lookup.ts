// Reporter ip/isp resolution, fetched once at session start.

export interface IpInfo {
  ip: string;
  isp: string;
}

export const STUB_LOOKUP: IpInfo = { ip: "203.0.113.7", isp: "ExampleNet" };

export type LookupMode = "live" | "stub" | "off";

type FetchLike = (url: string) => Promise<{ json(): Promise<unknown> }>;

export async function lookupSelf(
  mode: LookupMode,
  url = "https://ipinfo.io/json",
  fetchFn: FetchLike = fetch,
): Promise<IpInfo> {
  if (mode === "off") return { ip: "", isp: "" };
  if (mode === "stub") return { ...STUB_LOOKUP };
  try {
    const resp = await fetchFn(url);
    const body = (await resp.json()) as Record<string, unknown>;
    return {
      ip: typeof body.ip === "string" ? body.ip : "",
      isp:
        typeof body.org === "string"
          ? body.org
          : typeof body.isp === "string"
            ? body.isp
            : "",
    };
  } catch {
    // the measurement must not abort over an unreachable lookup service
    return { ip: "", isp: "" };
  }
}
