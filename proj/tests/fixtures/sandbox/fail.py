print("about to fail")
raise SystemExit("bad column: target")
