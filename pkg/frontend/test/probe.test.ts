import { beforeEach, describe, expect, it } from "vitest";

import { createProbe, isClickable, ownText, ProbeRecord } from "../src/probe";

/** jsdom has no layout engine: give an element a rendered box explicitly. */
function layOut(element: Element, width = 80, height = 20): void {
  (element as HTMLElement).getBoundingClientRect = () =>
    ({ width, height, top: 0, left: 0, right: width, bottom: height,
       x: 0, y: 0, toJSON: () => ({}) } as DOMRect);
}

function layOutTree(root: Element): void {
  layOut(root);
  for (const child of Array.from(root.querySelectorAll("*"))) {
    layOut(child);
  }
}

function probe() {
  return createProbe(document, window);
}

function byTag(records: ProbeRecord[], tag: string): ProbeRecord {
  const found = records.find((r) => r.tag === tag);
  if (!found) throw new Error(`no <${tag}> in snapshot`);
  return found;
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("collect", () => {
  it("records a button with its own text and clickability", () => {
    document.body.innerHTML = "<button>Ok</button>";
    layOutTree(document.documentElement);
    const records = probe().collect();
    const button = byTag(records, "button");
    expect(button.own_text).toBe("Ok");
    expect(button.clickable_self).toBe(true);
    expect(button.visible).toBe(true);
  });

  it("walks in preorder: wrapper before button, one level shallower", () => {
    document.body.innerHTML = "<div><button>Ok</button></div>";
    const records = probe().collect();
    const wrapper = byTag(records, "div");
    const button = byTag(records, "button");
    expect(button.depth).toBe(wrapper.depth + 1);
    expect(wrapper.doc_order).toBeLessThan(button.doc_order);
  });

  it("doc_order is the index and refs are unique", () => {
    document.body.innerHTML = "<p>a</p><p>b</p><span>c</span>";
    const records = probe().collect();
    records.forEach((record, index) => expect(record.doc_order).toBe(index));
    expect(new Set(records.map((r) => r.ref)).size).toBe(records.length);
  });

  it("depth is consistent with preorder nesting", () => {
    document.body.innerHTML =
      "<div><div><button>x</button></div><p>y</p></div><span>z</span>";
    const records = probe().collect();
    const stack: number[] = [];
    for (const record of records) {
      while (stack.length && stack[stack.length - 1] >= record.depth) {
        stack.pop();
      }
      expect(record.depth).toBeLessThanOrEqual(stack.length ? stack[stack.length - 1] + 1 : 0);
      stack.push(record.depth);
    }
  });

  it("own_text concatenates direct text children only", () => {
    document.body.innerHTML = "<div>outer <button>Ok</button> tail</div>";
    const records = probe().collect();
    expect(byTag(records, "div").own_text).toBe("outer  tail");
    expect(byTag(records, "button").own_text).toBe("Ok");
  });

  it("display:none and visibility:hidden elements are invisible", () => {
    document.body.innerHTML =
      '<span id="none" style="display:none">ok</span>' +
      '<span id="hidden" style="visibility:hidden">ok</span>' +
      '<b id="shown">ok</b>';
    layOutTree(document.documentElement);
    const records = probe().collect();
    expect(records.find((r) => r.tag === "span" && r.doc_order < byTag(records, "b").doc_order)!.visible).toBe(false);
    const spans = records.filter((r) => r.tag === "span");
    expect(spans.every((r) => !r.visible)).toBe(true);
    expect(byTag(records, "b").visible).toBe(true);
  });

  it("an element without a rendered box is invisible", () => {
    document.body.innerHTML = "<button>Ok</button>";
    // no layOut: jsdom reports a zero-size rect
    const records = probe().collect();
    expect(byTag(records, "button").visible).toBe(false);
  });

  it("anchors expose their raw href, other tags null", () => {
    document.body.innerHTML = '<a href="/page-1.html">more</a><p>x</p>';
    const records = probe().collect();
    expect(byTag(records, "a").href).toBe("/page-1.html");
    expect(byTag(records, "p").href).toBeNull();
  });

  it("onclick attribute makes any tag clickable", () => {
    document.body.innerHTML = '<p onclick="void 0">click me</p><p>plain</p>';
    const records = probe().collect();
    const [handler, plain] = records.filter((r) => r.tag === "p");
    expect(handler.clickable_self).toBe(true);
    expect(plain.clickable_self).toBe(false);
  });

  it("payload is JSON-serializable with the wire field names", () => {
    document.body.innerHTML = "<button>Ok</button>";
    const records = probe().collect();
    const parsed = JSON.parse(JSON.stringify(records));
    expect(Object.keys(parsed[0]).sort()).toEqual(
      ["clickable_self", "depth", "doc_order", "href", "own_text", "ref",
       "tag", "visible"]);
  });
});

describe("click", () => {
  it("fires the page's click handler exactly once", () => {
    document.body.innerHTML = "<button>Ok</button>";
    let clicks = 0;
    document.querySelector("button")!.addEventListener("click", () => { clicks += 1; });
    const domProbe = probe();
    const records = domProbe.collect();
    const result = domProbe.click(byTag(records, "button").ref);
    expect(result.ok).toBe(true);
    expect(clicks).toBe(1);
  });

  it("bubbles to ancestors like a user click", () => {
    document.body.innerHTML = "<div><button>Ok</button></div>";
    let seenAtWrapper = false;
    document.querySelector("div")!.addEventListener("click", () => { seenAtWrapper = true; });
    const domProbe = probe();
    const records = domProbe.collect();
    expect(domProbe.click(byTag(records, "button").ref).ok).toBe(true);
    expect(seenAtWrapper).toBe(true);
  });

  it("reports stale for a removed element", () => {
    document.body.innerHTML = "<button>Ok</button>";
    const domProbe = probe();
    const ref = byTag(domProbe.collect(), "button").ref;
    document.querySelector("button")!.remove();
    const result = domProbe.click(ref);
    expect(result.ok).toBe(false);
    expect(result.error).toMatch(/stale/);
  });

  it("reports stale for a ref from an earlier snapshot", () => {
    document.body.innerHTML = "<button>Ok</button>";
    const domProbe = probe();
    const ref = byTag(domProbe.collect(), "button").ref;
    domProbe.collect(); // new snapshot, new generation
    const result = domProbe.click(ref);
    expect(result.ok).toBe(false);
    expect(result.error).toMatch(/stale/);
  });

  it("rejects malformed refs without throwing", () => {
    const domProbe = probe();
    domProbe.collect();
    expect(domProbe.click("bogus").ok).toBe(false);
  });
});

describe("helpers", () => {
  it("ownText of an element with no text children is empty", () => {
    document.body.innerHTML = "<div><button>Ok</button></div>";
    expect(ownText(document.querySelector("div")!)).toBe("");
  });

  it("clickable tag set matches the detector's", () => {
    for (const tag of ["button", "a", "span", "div", "input"]) {
      expect(isClickable(document.createElement(tag))).toBe(true);
    }
    expect(isClickable(document.createElement("p"))).toBe(false);
  });
});

describe("install script", () => {
  it("exposes window.__domProbe with collect and click", async () => {
    await import("../src/inject");
    expect(window.__domProbe).toBeDefined();
    expect(typeof window.__domProbe!.collect).toBe("function");
    expect(typeof window.__domProbe!.click).toBe("function");
    document.body.innerHTML = "<button>Got it</button>";
    const records = window.__domProbe!.collect();
    expect(records.some((r) => r.own_text === "Got it")).toBe(true);
  });
});
