import subprocess
import sys
import re
import os
import tempfile


APP_DIR = os.path.dirname(os.path.abspath(__file__))


def run_option_market_and_check():
    output_dir = tempfile.mkdtemp(prefix="optionmarket_smoke_")
    cmd = [
        sys.executable,  # This uses the current Python interpreter
        os.path.join(APP_DIR, "OptionMarket.py"),
        "--output-dir", output_dir,
        "dispatch",
        os.path.join(APP_DIR, "configs", "example.json"),
        "--omega", "0.8"
    ]
    try:
        result = subprocess.run(
            cmd,
            capture_output=True,
            text=True,
            timeout=120  # seconds
        )
    except subprocess.TimeoutExpired:
        print("❌ OptionMarket timed out!")
        sys.exit(1)

    print("=== STDOUT ===")
    print(result.stdout)
    print("=== STDERR ===")
    print(result.stderr)

    # Day-ahead price 1 and real-time price 1/rho = 2 at omega = 0.8
    success_patterns = [
        r"P\* = 1 \$/MWh",
        r"p = 2 \$/MWh",
        r"✅ Done"
    ]
    if result.returncode == 0 and all(re.search(pat, result.stdout) for pat in success_patterns):
        print("✅ OptionMarket ran successfully!")
        sys.exit(0)
    else:
        print("❌ OptionMarket did not complete successfully!")
        sys.exit(1)

if __name__ == "__main__":
    run_option_market_and_check()
