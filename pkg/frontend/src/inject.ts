// Entry point bundled to dist/dom-probe.js and injected as script source by
// the live driver. Installing once per page keeps snapshot refs valid between
// the collect() and click() calls of one banner-detection pass.
import { createProbe, DomProbe } from "./probe";

declare global {
  interface Window {
    __domProbe?: DomProbe;
  }
}

(function install() {
  if (!window.__domProbe) {
    window.__domProbe = createProbe(document, window);
  }
})();
