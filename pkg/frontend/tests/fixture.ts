import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { Command, NetworkMessage, ServerMessage, Snapshot } from "../src/protocol.js";
import { parseServerMessage } from "../src/protocol.js";

interface Recording {
  messages: unknown[];
  sent: unknown[];
}

const here = dirname(fileURLToPath(import.meta.url));

export function loadRecording(): { messages: ServerMessage[]; sent: Command[] } {
  const raw = JSON.parse(
    readFileSync(join(here, "fixtures", "recorded.json"), "utf-8"),
  ) as Recording;
  return {
    messages: raw.messages.map(parseServerMessage),
    sent: raw.sent as Command[],
  };
}

export function recordedNetwork(): NetworkMessage {
  const { messages } = loadRecording();
  const net = messages.find((m) => m.type === "network");
  if (!net) throw new Error("recording lacks a network message");
  return net as NetworkMessage;
}

export function recordedSnapshots(): Snapshot[] {
  return loadRecording().messages.filter((m): m is Snapshot => m.type === "snapshot");
}
