/** Minimal in-process curator stub for queue behavior tests. */

import { createServer, type Server } from "node:http";
import type { AddressInfo } from "node:net";

import { pixelToMap } from "../src/geo.js";
import type { ClipTransform, PixelRing, ProposalDto } from "../src/types.js";

export const STUB_TRANSFORM: ClipTransform = {
  origin_x: 500000,
  origin_y: 2300000,
  pixel_size_x: 0.5,
  pixel_size_y: -0.5,
  crs_id: "EPSG:32613",
};

function rect(c0: number, r0: number, size: number): PixelRing {
  return [
    [c0, r0],
    [c0 + size, r0],
    [c0 + size, r0 + size],
    [c0, r0 + size],
    [c0, r0],
  ];
}

function proposalDto(id: string, c0: number, r0: number): ProposalDto {
  return {
    proposal_id: id,
    clip_id: "stub_clip_0",
    status: "pending",
    score: 200,
    polygon: {
      type: "Polygon",
      coordinates: [rect(c0, r0, 48).map(([c, r]) => [...pixelToMap(STUB_TRANSFORM, c, r)])],
    },
    clip_url: "/clips/stub_clip_0.png",
    mask_url: "/clips/stub_clip_0/mask.png",
    transform: STUB_TRANSFORM,
  };
}

export interface StubCurator {
  url: string;
  /** proposal ids that respond 409 to decisions */
  conflictIds: Set<string>;
  decisions: Array<{ proposalId: string; action: string }>;
  listRequests: number;
  close(): Promise<void>;
}

export async function startStub(): Promise<StubCurator> {
  const proposals = [
    proposalDto("stub_prop_0", 20, 20),
    proposalDto("stub_prop_1", 100, 20),
    proposalDto("stub_prop_2", 20, 120),
  ];
  const state: StubCurator = {
    url: "",
    conflictIds: new Set(),
    decisions: [],
    listRequests: 0,
    close: async () => {},
  };

  const server: Server = createServer((req, res) => {
    const url = req.url ?? "";
    const send = (status: number, body: unknown) => {
      res.writeHead(status, { "content-type": "application/json" });
      res.end(JSON.stringify(body));
    };
    if (req.method === "GET" && url.startsWith("/sessions/") && url.includes("/proposals")) {
      state.listRequests += 1;
      send(200, { proposals, total: proposals.length, page: 1 });
      return;
    }
    if (req.method === "POST" && url.startsWith("/proposals/")) {
      const id = url.split("/")[2];
      let raw = "";
      req.on("data", (chunk) => (raw += chunk));
      req.on("end", () => {
        const body = JSON.parse(raw) as { action: string };
        if (state.conflictIds.has(id)) {
          send(409, { detail: `proposal ${id} already decided` });
          return;
        }
        const prop = proposals.find((p) => p.proposal_id === id);
        if (!prop) {
          send(404, { detail: `unknown proposal ${id}` });
          return;
        }
        state.decisions.push({ proposalId: id, action: body.action });
        prop.status = body.action === "approve" ? "approved"
          : body.action === "edit" ? "edited" : "rejected";
        send(200, prop);
      });
      return;
    }
    send(404, { detail: `no route ${url}` });
  });

  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const addr = server.address() as AddressInfo;
  state.url = `http://127.0.0.1:${addr.port}`;
  state.close = () =>
    new Promise<void>((resolve, reject) =>
      server.close((err) => (err ? reject(err) : resolve())),
    );
  return state;
}
