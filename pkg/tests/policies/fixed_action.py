"""Test double: always reply with the action given on the command line."""
import json
import sys


def main():
    action = int(sys.argv[1])
    hello = json.loads(sys.stdin.readline())
    assert hello["hello"]["protocol"] == 1
    print(json.dumps({"ready": True}), flush=True)
    for line in sys.stdin:
        json.loads(line)
        print(json.dumps({"action": action}), flush=True)


if __name__ == "__main__":
    main()
