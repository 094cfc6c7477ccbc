/**
 * DOM snapshot and click probe.
 *
 * collect() walks the rendered document's elements in preorder and returns one
 * record per element; own_text concatenates direct text children only, so a
 * container never inherits the label of a button inside it. Refs are tokens
 * into a per-snapshot element array kept in page scope - deliberately not CSS
 * selectors, which break on customized consent modules. click(ref) dispatches
 * a user-like click on the referenced element and reports staleness instead
 * of throwing across the wire.
 *
 * Same-origin subframes are flattened into the walk; cross-origin frames and
 * shadow roots are left alone.
 */

export interface ProbeRecord {
  ref: string;
  tag: string;
  own_text: string;
  depth: number;
  doc_order: number;
  visible: boolean;
  clickable_self: boolean;
  href: string | null;
}

export interface ClickResult {
  ok: boolean;
  error?: string;
}

export interface DomProbe {
  collect(): ProbeRecord[];
  click(ref: string): ClickResult;
}

const CLICKABLE_TAGS = new Set(["button", "a", "span", "div", "input"]);

const TEXT_NODE = 3;

export function ownText(element: Element): string {
  let text = "";
  for (const child of Array.from(element.childNodes)) {
    if (child.nodeType === TEXT_NODE) {
      text += child.nodeValue ?? "";
    }
  }
  return text;
}

export function isVisible(element: Element, win: Window): boolean {
  try {
    const style = win.getComputedStyle(element);
    if (style.display === "none" || style.visibility === "hidden") {
      return false;
    }
    const rect = element.getBoundingClientRect();
    return rect.width > 0 && rect.height > 0;
  } catch {
    return false;
  }
}

export function isClickable(element: Element): boolean {
  const tag = element.tagName.toLowerCase();
  if (CLICKABLE_TAGS.has(tag)) {
    return true;
  }
  const handler = (element as HTMLElement).onclick;
  return typeof handler === "function" || element.hasAttribute("onclick");
}

function sameOriginContentDocument(element: Element): Document | null {
  if (element.tagName.toLowerCase() !== "iframe") {
    return null;
  }
  try {
    return (element as HTMLIFrameElement).contentDocument;
  } catch {
    return null; // cross-origin
  }
}

export function createProbe(doc: Document, win: Window): DomProbe {
  let elements: Element[] = [];
  let generation = 0;

  function walk(element: Element, depth: number, records: ProbeRecord[]): void {
    const index = elements.length;
    elements.push(element);
    const tag = element.tagName.toLowerCase();
    records.push({
      ref: `s${generation}:${index}`,
      tag,
      own_text: ownText(element),
      depth,
      doc_order: index,
      visible: isVisible(element, win),
      clickable_self: isClickable(element),
      href: tag === "a" ? element.getAttribute("href") : null,
    });
    const framed = sameOriginContentDocument(element);
    if (framed && framed.documentElement) {
      walk(framed.documentElement, depth + 1, records);
      return;
    }
    for (const child of Array.from(element.children)) {
      walk(child, depth + 1, records);
    }
  }

  function collect(): ProbeRecord[] {
    generation += 1;
    elements = [];
    const records: ProbeRecord[] = [];
    if (doc.documentElement) {
      walk(doc.documentElement, 0, records);
    }
    return records;
  }

  function click(ref: string): ClickResult {
    const match = /^s(\d+):(\d+)$/.exec(ref);
    if (!match) {
      return { ok: false, error: `malformed ref ${ref}` };
    }
    if (Number(match[1]) !== generation) {
      return { ok: false, error: "stale: ref from an earlier snapshot" };
    }
    const element = elements[Number(match[2])];
    if (!element || !element.isConnected) {
      return { ok: false, error: "stale: element no longer in document" };
    }
    try {
      // build events in the element's own realm; "view" must be that
      // realm's Window instance, so fall back to viewless events when the
      // environment rejects it
      const realm = (element.ownerDocument?.defaultView ?? win) as
        Window & typeof globalThis;
      const fire = (type: string) => {
        let event: MouseEvent;
        try {
          event = new realm.MouseEvent(type, {
            bubbles: true,
            cancelable: true,
            view: realm,
          });
        } catch {
          event = new realm.MouseEvent(type, { bubbles: true, cancelable: true });
        }
        element.dispatchEvent(event);
      };
      fire("mousedown");
      fire("mouseup");
      // prefer the native activation path; it fires the click event itself
      const native = (element as HTMLElement).click;
      if (typeof native === "function") {
        native.call(element);
      } else {
        fire("click");
      }
      return { ok: true };
    } catch (error) {
      return { ok: false, error: String(error) };
    }
  }

  return { collect, click };
}
