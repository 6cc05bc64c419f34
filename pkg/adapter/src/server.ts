/**
 * Transports for a protocol session: standard streams or a TCP port.
 * One client at a time, requests handled strictly in order (matching the
 * engine's serialising client gate).
 */

import * as net from "node:net";
import type { Readable, Writable } from "node:stream";

import { createSession, type LabelMap, type Model } from "./protocol.js";

function pump(
  input: Readable,
  output: Writable,
  model: Model,
  labels: LabelMap | undefined,
  onClose: () => void,
): void {
  const session = createSession(model, labels);
  let buffer = "";
  input.on("data", (chunk: Buffer) => {
    buffer += chunk.toString("utf8");
    let nl;
    while ((nl = buffer.indexOf("\n")) >= 0) {
      const line = buffer.slice(0, nl);
      buffer = buffer.slice(nl + 1);
      for (const reply of session.handleLine(line)) {
        output.write(reply + "\n");
      }
      if (session.closed) {
        onClose();
        return;
      }
    }
  });
  input.on("end", onClose);
  input.on("error", onClose);
}

export function serveStdio(model: Model, labels?: LabelMap): void {
  pump(process.stdin, process.stdout, model, labels, () => process.exit(0));
}

export function serveTcp(model: Model, labels: LabelMap | undefined, port: number): net.Server {
  let busy = false;
  const server = net.createServer((socket) => {
    if (busy) {
      socket.destroy();
      return;
    }
    busy = true;
    const release = () => {
      busy = false;
      socket.end();
    };
    socket.on("close", () => {
      busy = false;
    });
    pump(socket, socket, model, labels, release);
  });
  server.listen(port);
  return server;
}
