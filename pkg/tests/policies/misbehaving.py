"""Test double with selectable protocol violations (fault injection)."""
import json
import sys
import time


def main():
    mode = sys.argv[1]
    if mode == "no_handshake":
        print("definitely not json", flush=True)
        sys.stdin.readline()
        return
    json.loads(sys.stdin.readline())
    print(json.dumps({"ready": True}), flush=True)
    for line in sys.stdin:
        json.loads(line)
        if mode == "malformed":
            print("{broken json", flush=True)
        elif mode == "timeout":
            time.sleep(30)
            print(json.dumps({"action": 0}), flush=True)
        elif mode == "out_of_range":
            print(json.dumps({"action": 10**6}), flush=True)
        elif mode == "bad_dist":
            n = json.loads(line)["n"]
            print(json.dumps({"dist": [0.7] * (n - 1)}), flush=True)
        elif mode == "empty_reply":
            print(json.dumps({}), flush=True)
        elif mode == "close_pipe":
            return


if __name__ == "__main__":
    main()
