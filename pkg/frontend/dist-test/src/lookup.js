// Reporter ip/isp resolution, fetched once at session start.
export const STUB_LOOKUP = { ip: "203.0.113.7", isp: "ExampleNet" };
export async function lookupSelf(mode, url = "https://ipinfo.io/json", fetchFn = fetch) {
    if (mode === "off")
        return { ip: "", isp: "" };
    if (mode === "stub")
        return { ...STUB_LOOKUP };
    try {
        const resp = await fetchFn(url);
        const body = (await resp.json());
        return {
            ip: typeof body.ip === "string" ? body.ip : "",
            isp: typeof body.org === "string"
                ? body.org
                : typeof body.isp === "string"
                    ? body.isp
                    : "",
        };
    }
    catch {
        // the measurement must not abort over an unreachable lookup service
        return { ip: "", isp: "" };
    }
}
