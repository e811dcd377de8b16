#!/usr/bin/env python3
"""External reference matcher for circfuzz.

Reads lines of base64(pattern) TAB base64(string) from stdin and answers
"1" or "0" per line, using whole-string matching from Python's re module.
"""
import base64
import re
import sys

cache = {}

for line in sys.stdin:
    line = line.rstrip("\n")
    if not line:
        continue
    pattern_b64, _, string_b64 = line.partition("\t")
    pattern = base64.b64decode(pattern_b64)
    subject = base64.b64decode(string_b64)
    compiled = cache.get(pattern)
    if compiled is None:
        compiled = re.compile(pattern, re.DOTALL)
        cache[pattern] = compiled
    sys.stdout.write("1\n" if compiled.fullmatch(subject) else "0\n")
    sys.stdout.flush()
