/**
 * Literal number-token extraction from JSON text.
 *
 * The service and the browser both print floating point numbers as their
 * shortest round-trip decimal, but they switch to exponent notation at
 * different magnitudes: the service writes 0.00005 as "5e-05" while
 * `String(0.00005)` gives "0.00005". Parsing a payload and re-formatting a
 * value can therefore change its spelling even though the value is identical.
 * To display numbers exactly as the service wrote them, this module scans the
 * raw response text and records every number token verbatim, keyed by its
 * path ("traces/12/ffr_post/3", "ffr_at_evaluation_points/1510", ...).
 *
 * Path segments are object keys and array indices joined with "/". Keys
 * containing "/" would be ambiguous; the service never emits such keys.
 */

const NUMBER_RE = /-?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?/y;

class Scanner {
  pos = 0;
  readonly tokens = new Map<string, string>();

  constructor(readonly text: string) {}

  fail(what: string): never {
    throw new SyntaxError(`${what} at offset ${this.pos}`);
  }

  skipWs(): void {
    while (this.pos < this.text.length) {
      const c = this.text.charCodeAt(this.pos);
      // space, tab, newline, carriage return
      if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) this.pos += 1;
      else break;
    }
  }

  parseValue(path: string): void {
    this.skipWs();
    const c = this.text[this.pos];
    if (c === undefined) this.fail("unexpected end of input");
    if (c === "{") return this.parseObject(path);
    if (c === "[") return this.parseArray(path);
    if (c === '"') {
      this.parseString();
      return;
    }
    if (c === "t") return this.parseLiteral("true");
    if (c === "f") return this.parseLiteral("false");
    if (c === "n") return this.parseLiteral("null");
    this.parseNumber(path);
  }

  parseObject(path: string): void {
    this.pos += 1; // "{"
    this.skipWs();
    if (this.text[this.pos] === "}") {
      this.pos += 1;
      return;
    }
    for (;;) {
      this.skipWs();
      if (this.text[this.pos] !== '"') this.fail("expected object key");
      const key = this.parseString();
      this.skipWs();
      if (this.text[this.pos] !== ":") this.fail("expected ':'");
      this.pos += 1;
      this.parseValue(path === "" ? key : `${path}/${key}`);
      this.skipWs();
      const c = this.text[this.pos];
      if (c === ",") {
        this.pos += 1;
        continue;
      }
      if (c === "}") {
        this.pos += 1;
        return;
      }
      this.fail("expected ',' or '}'");
    }
  }

  parseArray(path: string): void {
    this.pos += 1; // "["
    this.skipWs();
    if (this.text[this.pos] === "]") {
      this.pos += 1;
      return;
    }
    let index = 0;
    for (;;) {
      this.parseValue(path === "" ? String(index) : `${path}/${index}`);
      index += 1;
      this.skipWs();
      const c = this.text[this.pos];
      if (c === ",") {
        this.pos += 1;
        continue;
      }
      if (c === "]") {
        this.pos += 1;
        return;
      }
      this.fail("expected ',' or ']'");
    }
  }

  /** Parses a JSON string and returns its decoded value. */
  parseString(): string {
    this.pos += 1; // opening quote
    let out = "";
    for (;;) {
      const c = this.text[this.pos];
      if (c === undefined) this.fail("unterminated string");
      if (c === '"') {
        this.pos += 1;
        return out;
      }
      if (c === "\\") {
        const esc = this.text[this.pos + 1];
        if (esc === undefined) this.fail("unterminated escape");
        this.pos += 2;
        switch (esc) {
          case '"':
          case "\\":
          case "/":
            out += esc;
            break;
          case "b":
            out += "\b";
            break;
          case "f":
            out += "\f";
            break;
          case "n":
            out += "\n";
            break;
          case "r":
            out += "\r";
            break;
          case "t":
            out += "\t";
            break;
          case "u": {
            const hex = this.text.slice(this.pos, this.pos + 4);
            if (!/^[0-9a-fA-F]{4}$/.test(hex)) this.fail("bad \\u escape");
            out += String.fromCharCode(parseInt(hex, 16));
            this.pos += 4;
            break;
          }
          default:
            this.fail(`bad escape '\\${esc}'`);
        }
        continue;
      }
      out += c;
      this.pos += 1;
    }
  }

  parseLiteral(word: string): void {
    if (this.text.startsWith(word, this.pos)) {
      this.pos += word.length;
      return;
    }
    this.fail(`expected '${word}'`);
  }

  parseNumber(path: string): void {
    NUMBER_RE.lastIndex = this.pos;
    const m = NUMBER_RE.exec(this.text);
    if (m === null || m.index !== this.pos) this.fail("expected a JSON value");
    this.tokens.set(path, m[0]);
    this.pos += m[0].length;
  }
}

/**
 * Scans JSON text and returns every number token verbatim, keyed by path.
 * Throws SyntaxError on malformed input.
 */
export function numberTokens(text: string): Map<string, string> {
  const scanner = new Scanner(text);
  scanner.parseValue("");
  scanner.skipWs();
  if (scanner.pos !== text.length) scanner.fail("trailing characters");
  return scanner.tokens;
}
