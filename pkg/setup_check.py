#!/usr/bin/env python3
"""
Verify that the spectra environment is ready to run experiments
"""

import os
import sys
import tempfile
from pathlib import Path


# Test imports
def test_imports():
    print("🔍 Testing imports...")

    for module, hint in (
        ("numpy", "pip install numpy"),
        ("scipy", "pip install scipy"),
        ("mpmath", "pip install mpmath"),
        ("tqdm", "pip install tqdm"),
    ):
        try:
            __import__(module)
            print(f"✅ {module} imported successfully")
        except ImportError as e:
            print(f"❌ {module} import failed: {e}")
            print(f"Run: {hint}  (or pip install -r requirements.txt)")
            return False
    return True


# Test the Philox streams
def test_random_streams():
    print("\n🎲 Testing counter-based random streams...")

    try:
        from model import ModelParams, sample_bernoulli

        params = ModelParams(20, 0.3, seed=1)
        if sample_bernoulli(params, 5).digest() != sample_bernoulli(params, 5).digest():
            print("❌ The same (seed, stream) drew different matrices")
            return False
        print("✅ Streams are reproducible")
        return True
    except Exception as e:
        print(f"❌ Stream test failed: {e}")
        return False


# Test the SVD back ends against each other
def test_linear_algebra():
    print("\n🧮 Testing SVD back ends...")

    try:
        import numpy as np
        from spectral import exact_rank, singular_values

        M = np.random.default_rng(0).standard_normal((12, 12))
        if not np.allclose(singular_values(M, "jacobi"), singular_values(M, "lapack"), rtol=1e-10):
            print("❌ Jacobi and LAPACK singular values disagree")
            return False
        if exact_rank(np.ones((4, 4), dtype=int)) != 1:
            print("❌ Exact rank is wrong on the all-ones matrix")
            return False
        print("✅ Jacobi, LAPACK and exact rank agree")
        return True
    except Exception as e:
        print(f"❌ Linear algebra test failed: {e}")
        return False


# Test the catalogue
def test_catalog():
    print("\n📚 Testing experiment catalogue...")

    try:
        from config import DEFAULT_CATALOG, ExperimentCatalog

        presets = ExperimentCatalog(DEFAULT_CATALOG).load()["experiments"]
        print(f"✅ {len(presets)} presets in {DEFAULT_CATALOG}")
        return True
    except (FileNotFoundError, ValueError) as e:
        print(f"❌ Catalogue problem: {e}")
        return False


# Test a tiny run through the process pool
def test_worker_pool():
    print("\n⚙️  Testing the worker pool...")

    try:
        from config import config_from_values
        from harness import run

        values = {"experiment": "zero-prob", "n": 20, "p": 0.1, "trials": 64, "chunk_size": 16}
        with tempfile.TemporaryDirectory() as temp_dir:
            single = run(config_from_values({**values, "workers": 1}), progress=False)
            pooled = run(config_from_values({**values, "workers": 2, "out": str(Path(temp_dir) / "r.json")}),
                         progress=False)
        if single.to_json() != pooled.to_json():
            print("❌ Serial and pooled runs differ")
            return False
        print(f"✅ Pool works ({os.cpu_count()} CPUs available)")
        return True
    except Exception as e:
        print(f"❌ Worker pool test failed: {e}")
        return False


def main():
    print("🧪 spectra - Setup Check")
    print("=" * 50)

    all_passed = test_imports()
    if all_passed:
        for check in (test_random_streams, test_linear_algebra, test_catalog, test_worker_pool):
            if not check():
                all_passed = False

    print("\n" + "=" * 50)
    if all_passed:
        print("🎉 All checks passed! You're ready to run experiments.")
        print("\nNext steps:")
        print("1. List experiments: python spectra.py list-experiments")
        print("2. A quick run: python spectra.py zero-prob --n 50 --pn log --trials 2000")
        print("3. Run the test suite: python -m pytest tests/")
    else:
        print("❌ Some checks failed. Please fix the issues above before running experiments.")
        sys.exit(1)


if __name__ == "__main__":
    main()
