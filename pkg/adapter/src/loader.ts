/**
 * Model loading: either a JS/TS module exporting a predict function plus its
 * feature kinds ("path/to/model.mjs#predict"), or a saved forest dump
 * produced by the engine's train command (plain text, schema included).
 */

import { readFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import type { Kind, Model } from "./protocol.js";

function checkKinds(value: unknown, source: string): Kind[] {
  if (!Array.isArray(value) || value.length === 0 ||
      !value.every((k) => k === "c" || k === "n")) {
    throw new Error(`${source}: expected an exported "kinds" array of "c"/"n"`);
  }
  return value as Kind[];
}

export async function loadCallableModel(path: string, callable: string): Promise<Model> {
  const mod = await import(pathToFileURL(path).href);
  const fn = mod[callable];
  if (typeof fn !== "function") {
    throw new Error(`${path}: no exported function named ${callable}`);
  }
  return { kinds: checkKinds(mod.kinds, path), predict: fn };
}

interface TreeNode {
  leaf: boolean;
  klass: number;
  feature: number;
  categorical: boolean;
  value: number;
  left: number;
  right: number;
}

interface Feature {
  name: string;
  kind: Kind;
  categories: Map<string, number>;
}

export function parseForestDump(text: string): Model {
  const lines = text.split("\n");
  if (!lines[0]?.startsWith("forest ")) {
    throw new Error("not a forest dump: missing forest header");
  }
  let pos = 1;
  if (!lines[pos]?.startsWith("schema ")) {
    throw new Error("forest dump lacks a schema section");
  }
  const nFeatures = Number(lines[pos]!.split(" ")[1]);
  pos += 1;

  const features: Feature[] = [];
  for (let i = 0; i < nFeatures; i++, pos++) {
    const parts = lines[pos]!.split("\t");
    const kind = parts[1] as Kind;
    const categories = new Map<string, number>();
    if (kind === "c") {
      // dump files escape commas inside category values as %2C
      parts[2]!.split(",").forEach((cat, idx) =>
        categories.set(cat.replaceAll("%2C", ","), idx),
      );
    }
    features.push({ name: parts[0]!, kind, categories });
  }

  const trees: TreeNode[][] = [];
  while (pos < lines.length && lines[pos]!.startsWith("tree ")) {
    const nNodes = Number(lines[pos]!.split(" ")[2]!.split("=")[1]);
    pos += 1;
    const nodes: TreeNode[] = new Array(nNodes);
    for (let i = 0; i < nNodes; i++, pos++) {
      const parts = lines[pos]!.split(" ");
      const id = Number(parts[0]);
      if (parts[1] === "leaf") {
        nodes[id] = {
          leaf: true, klass: Number(parts[2]),
          feature: -1, categorical: false, value: 0, left: id, right: id,
        };
      } else {
        const n0 = Number(parts[7]);
        const n1 = Number(parts[8]);
        nodes[id] = {
          leaf: false,
          klass: n0 >= n1 ? 0 : 1,
          feature: Number(parts[2]),
          categorical: parts[3] === "cat",
          value: Number(parts[4]),
          left: Number(parts[5]),
          right: Number(parts[6]),
        };
      }
    }
    trees.push(nodes);
  }
  if (trees.length === 0) {
    throw new Error("forest dump contains no trees");
  }

  const encode = (values: Array<string | number>): number[] =>
    values.map((v, i) => {
      const f = features[i]!;
      if (f.kind === "n") return v as number;
      const code = f.categories.get(String(v));
      if (code === undefined) {
        throw new Error(`unknown category ${String(v)} for feature ${f.name}`);
      }
      return code;
    });

  const predictTree = (nodes: TreeNode[], row: number[]): number => {
    let at = 0;
    while (!nodes[at]!.leaf) {
      const node = nodes[at]!;
      const v = row[node.feature]!;
      const goLeft = node.categorical ? v === node.value : v <= node.value;
      at = goLeft ? node.left : node.right;
    }
    return nodes[at]!.klass;
  };

  return {
    kinds: features.map((f) => f.kind),
    predict(values) {
      const row = encode(values);
      let votes = 0;
      for (const tree of trees) votes += predictTree(tree, row);
      return 2 * votes > trees.length ? 1 : 0;
    },
  };
}

export async function loadModel(spec: string): Promise<Model> {
  const hash = spec.lastIndexOf("#");
  if (hash > 0) {
    return loadCallableModel(spec.slice(0, hash), spec.slice(hash + 1));
  }
  return parseForestDump(readFileSync(spec, "utf8"));
}
