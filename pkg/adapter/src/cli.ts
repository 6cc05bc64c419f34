#!/usr/bin/env node
/**
 * rulelens-adapter: expose a model as a wire-protocol oracle.
 *
 *   rulelens-adapter --model model.mjs#predict --stdio
 *   rulelens-adapter --model forest.txt --port 9000 --labels deny=0,grant=1
 */

import { parseArgs } from "node:util";

import { loadModel } from "./loader.js";
import { parseLabelMap, type LabelMap } from "./protocol.js";
import { serveStdio, serveTcp } from "./server.js";

async function main(): Promise<void> {
  const { values } = parseArgs({
    options: {
      model: { type: "string" },
      port: { type: "string" },
      stdio: { type: "boolean", default: false },
      labels: { type: "string" },
    },
  });
  if (!values.model) {
    console.error("--model <path.mjs#fn | forest-dump.txt> is required");
    process.exit(2);
  }
  if (!values.stdio && values.port === undefined) {
    console.error("choose a transport: --stdio or --port <n>");
    process.exit(2);
  }
  const labels: LabelMap | undefined =
    values.labels === undefined ? undefined : parseLabelMap(values.labels);
  const model = await loadModel(values.model);
  if (values.stdio) {
    serveStdio(model, labels);
  } else {
    const port = Number(values.port);
    serveTcp(model, labels, port);
    console.error(`serving on port ${port}`);
  }
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : String(err));
  process.exit(1);
});
