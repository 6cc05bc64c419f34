import { describe, expect, it } from "vitest";

import {
  createSession,
  mapLabel,
  parseLabelMap,
  unescapeValue,
  type Model,
} from "../src/protocol.js";

const threshold: Model = {
  kinds: ["n", "n"],
  predict: (values) => ((values[0] as number) > 0.5 ? 1 : 0),
};

describe("scripted session transcript", () => {
  it("matches the documented wire format byte for byte", () => {
    const session = createSession(threshold);
    const wire: string[] = [];
    const send = (line: string) => {
      wire.push(`C: ${line}\n`);
      for (const reply of session.handleLine(line)) {
        wire.push(`S: ${reply}\n`);
      }
    };
    send("HELLO 2 n,n");
    send("PREDICT 0.75,0.1");
    send("PREDICT 0.25,0.9");
    send("BATCH 3");
    send("0.9,0.0");
    send("0.1,0.0");
    send("0.5,0.5");
    send("BYE");
    expect(session.closed).toBe(true);
    expect(wire.join("")).toBe(
      "C: HELLO 2 n,n\n" +
        "S: OK\n" +
        "C: PREDICT 0.75,0.1\n" +
        "S: 1\n" +
        "C: PREDICT 0.25,0.9\n" +
        "S: 0\n" +
        "C: BATCH 3\n" +
        "C: 0.9,0.0\n" +
        "S: 1\n" +
        "C: 0.1,0.0\n" +
        "S: 0\n" +
        "C: 0.5,0.5\n" +
        "S: 0\n" +
        "C: BYE\n",
    );
  });
});

describe("handshake validation", () => {
  it("accepts a matching schema", () => {
    expect(createSession(threshold).handleLine("HELLO 2 n,n")).toEqual(["OK"]);
  });

  it("rejects mismatched arity or kinds", () => {
    expect(createSession(threshold).handleLine("HELLO 3 n,n,n")).toEqual([
      "ERR schema mismatch",
    ]);
    expect(createSession(threshold).handleLine("HELLO 2 n,c")).toEqual([
      "ERR schema mismatch",
    ]);
  });

  it("flags malformed hellos but keeps the session alive", () => {
    const session = createSession(threshold);
    expect(session.handleLine("HELLO two")).toEqual(["ERR malformed hello"]);
    expect(session.handleLine("HELLO 2 n,n")).toEqual(["OK"]);
  });
});

describe("prediction handling", () => {
  it("continues after malformed lines", () => {
    const session = createSession(threshold);
    session.handleLine("HELLO 2 n,n");
    expect(session.handleLine("FROBNICATE 1")[0]).toMatch(/^ERR unknown command/);
    expect(session.handleLine("PREDICT 0.9")[0]).toMatch(/^ERR malformed record/);
    expect(session.handleLine("PREDICT 0.9,zzz")[0]).toMatch(/^ERR malformed record/);
    expect(session.handleLine("PREDICT 0.9,0.1")).toEqual(["1"]);
  });

  it("reports model exceptions as ERR model-failure and continues", () => {
    const exploding: Model = {
      kinds: ["n"],
      predict: (values) => {
        if ((values[0] as number) < 0) throw new Error("boom");
        return 1;
      },
    };
    const session = createSession(exploding);
    expect(session.handleLine("PREDICT -1.0")).toEqual(["ERR model-failure"]);
    expect(session.handleLine("PREDICT 2.0")).toEqual(["1"]);
  });

  it("reports unmappable labels", () => {
    const vague: Model = { kinds: ["n"], predict: () => "maybe" };
    const session = createSession(vague);
    expect(session.handleLine("PREDICT 0.5")).toEqual(["ERR label-unmappable"]);
  });

  it("applies an explicit label mapping", () => {
    const worded: Model = {
      kinds: ["n"],
      predict: (values) => ((values[0] as number) > 0 ? "grant" : "deny"),
    };
    const labels = parseLabelMap("deny=0,grant=1");
    const session = createSession(worded, labels);
    expect(session.handleLine("PREDICT 1.0")).toEqual(["1"]);
    expect(session.handleLine("PREDICT -1.0")).toEqual(["0"]);
  });

  it("unescapes %2C in categorical values", () => {
    const echoer: Model = {
      kinds: ["c"],
      predict: (values) => (values[0] === "a,b" ? 1 : 0),
    };
    const session = createSession(echoer);
    expect(session.handleLine("PREDICT a%2Cb")).toEqual(["1"]);
    expect(session.handleLine("PREDICT ab")).toEqual(["0"]);
  });
});

describe("statelessness", () => {
  it("predictions are independent of request order", () => {
    const payloads = Array.from({ length: 50 }, (_, i) => `${(i % 10) / 10},${i / 50}`);
    const run = (order: number[]) => {
      const session = createSession(threshold);
      session.handleLine("HELLO 2 n,n");
      const out = new Map<string, string>();
      for (const idx of order) {
        const payload = payloads[idx]!;
        out.set(payload, session.handleLine(`PREDICT ${payload}`)[0]!);
      }
      return out;
    };
    const forward = run(payloads.map((_, i) => i));
    const backward = run(payloads.map((_, i) => payloads.length - 1 - i));
    for (const [payload, label] of forward) {
      expect(backward.get(payload)).toBe(label);
    }
  });
});

describe("helpers", () => {
  it("unescape and label mapping corner cases", () => {
    expect(unescapeValue("a%2Cb%2Cc")).toBe("a,b,c");
    expect(mapLabel(1)).toBe(1);
    expect(mapLabel("0")).toBe(0);
    expect(mapLabel(true)).toBe(1);
    expect(mapLabel(2)).toBeNull();
    expect(mapLabel("grant", parseLabelMap("grant=1"))).toBe(1);
    expect(() => parseLabelMap("grant=2")).toThrow();
  });
});
