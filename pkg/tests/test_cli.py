"""
Test suite for CLI module
"""

import json
import tempfile
import unittest
from pathlib import Path

from click.testing import CliRunner

from hestonam.cli.main import cli
from hestonam.data.store import BoundaryStore

SMALL_RUN = """
model.kappa = 2.0
model.theta = 0.04
model.xi = 0.3
model.rho = -0.5
model.v0 = 0.04
market.r = 0.03
market.q = {q}
market.spot = 100.0
option.strike = 100.0
option.maturity = 0.5
sim.n_paths = {n_paths}
sim.n_steps = 10
sim.seed = 11
"""


class TestCLI(unittest.TestCase):
    """Test cases for CLI commands"""

    def setUp(self):
        """Set up test fixtures"""
        self.runner = CliRunner()
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        """Tear down test fixtures"""
        self.temp_dir.cleanup()

    def write_config(self, q: float = 0.12, n_paths: int = 20_000, name: str = "run.toml") -> str:
        path = self.root / name
        path.write_text(SMALL_RUN.format(q=q, n_paths=n_paths))
        return str(path)

    def invoke(self, *args):
        return self.runner.invoke(cli, ["--quiet", *args])

    def test_help(self):
        """Test CLI initialization"""
        result = self.runner.invoke(cli, ['--help'])
        self.assertEqual(result.exit_code, 0)
        self.assertIn("hestonam", result.output)
        for command in ("price", "benchmark", "boundary", "simulate", "show-config"):
            self.assertIn(command, result.output)

    def test_show_config(self):
        """Defaults are filled in"""
        result = self.invoke('--config', self.write_config(), 'show-config')
        self.assertEqual(result.exit_code, 0)
        self.assertIn("model.kappa", result.output)
        self.assertIn("params_hash", result.output)

    def test_invalid_config(self):
        """Offending keys are named and the exit status is 2"""
        path = self.root / "bad.toml"
        path.write_text("model.kappa = -1.0\nsim.bogus = 3\n")
        result = self.invoke('--config', str(path), 'show-config')
        self.assertEqual(result.exit_code, 2)
        self.assertIn("model.kappa", result.output)
        self.assertIn("sim.bogus", result.output)

    def test_missing_config(self):
        result = self.invoke('--config', str(self.root / "absent.toml"), 'show-config')
        self.assertEqual(result.exit_code, 2)

    def test_invalid_override(self):
        result = self.invoke('--config', self.write_config(), '--workers', '0', 'show-config')
        self.assertEqual(result.exit_code, 2)

    def test_price_json(self):
        """Same seed, byte-identical output"""
        config = self.write_config()
        outputs = []
        for name in ("a.json", "b.json"):
            out = self.root / name
            result = self.invoke('--config', config, '-o', str(out), 'price')
            self.assertEqual(result.exit_code, 0, result.output)
            outputs.append(out.read_text())
        self.assertEqual(outputs[0], outputs[1])

        payload = json.loads(outputs[0])
        self.assertEqual(list(payload), ["price", "european", "premium", "warnings"])
        self.assertAlmostEqual(payload["price"], payload["european"] + payload["premium"], places=10)

    def test_price_independent_of_workers(self):
        config = self.write_config()
        prices = []
        for workers in ("1", "2"):
            out = self.root / f"w{workers}.json"
            result = self.invoke('--config', config, '--workers', workers, '-o', str(out), 'price')
            self.assertEqual(result.exit_code, 0, result.output)
            prices.append(json.loads(out.read_text())["price"])
        self.assertEqual(prices[0], prices[1])

    def test_price_csv(self):
        out = self.root / "price.csv"
        result = self.invoke('--config', self.write_config(), '--format', 'csv', '-o', str(out), 'price')
        self.assertEqual(result.exit_code, 0, result.output)
        lines = out.read_text().splitlines()
        self.assertEqual(lines[0], "price,european,premium,warnings")
        self.assertEqual(len(lines), 2)

    def test_price_without_dividends(self):
        """q = 0 calls are priced as European"""
        out = self.root / "price.json"
        result = self.invoke('--config', self.write_config(q=0.0), '-o', str(out), 'price')
        self.assertEqual(result.exit_code, 0, result.output)
        payload = json.loads(out.read_text())
        self.assertEqual(payload["premium"], 0.0)
        self.assertTrue(any("European-equivalent" in w for w in payload["warnings"]))

    def test_boundary_without_dividends(self):
        """No exercise region exits with status 4"""
        result = self.invoke('--config', self.write_config(q=0.0), 'boundary')
        self.assertEqual(result.exit_code, 4)
        self.assertIn("no exercise region found", result.output)

    def test_boundary_and_cloud(self):
        out = self.root / "boundary.json"
        cloud = self.root / "cloud.csv"
        result = self.invoke('--config', self.write_config(), '-o', str(out), 'boundary', '--cloud', str(cloud))
        self.assertEqual(result.exit_code, 0, result.output)
        curve = json.loads(out.read_text())
        self.assertEqual(curve["taus"][0], 0.0)
        self.assertEqual(len(curve["taus"]), len(curve["b0"]))
        self.assertEqual(cloud.read_text().splitlines()[0], "step,tau,v_level,critical_price")

        priced = self.root / "priced.json"
        result = self.invoke('--config', self.write_config(), '-o', str(priced), 'price', '--boundary', str(out))
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("price", json.loads(priced.read_text()))

    def test_boundary_store(self):
        """A second run reuses the stored boundary"""
        store = self.root / "cache" / "boundaries.json"
        config = self.write_config()
        for name in ("a.json", "b.json"):
            result = self.invoke('--config', config, '--store', str(store), '-o', str(self.root / name), 'price')
            self.assertEqual(result.exit_code, 0, result.output)
        self.assertTrue(store.exists())
        self.assertEqual(
            json.loads((self.root / "a.json").read_text())["price"],
            json.loads((self.root / "b.json").read_text())["price"],
        )

    def test_cache_list_and_remove(self):
        """Stored boundaries are listed by hash and can be removed"""
        store = self.root / "cache" / "boundaries.json"
        result = self.invoke('--config', self.write_config(), '--store', str(store),
                             '-o', str(self.root / "a.json"), 'price')
        self.assertEqual(result.exit_code, 0, result.output)
        entries = BoundaryStore(store).entries()
        self.assertEqual(len(entries), 1)
        params_hash = entries[0]["params_hash"]

        result = self.invoke('--store', str(store), 'cache', 'list')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn(params_hash, result.output)

        result = self.invoke('--store', str(store), 'cache', 'remove', params_hash)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(BoundaryStore(store).entries(), [])

        result = self.invoke('--store', str(store), 'cache', 'remove', params_hash)
        self.assertEqual(result.exit_code, 2)

    def test_cache_list_empty(self):
        result = self.invoke('--store', str(self.root / "empty.json"), 'cache', 'list')
        self.assertEqual(result.exit_code, 0, result.output)

    def test_benchmark_csv(self):
        out = self.root / "bench.csv"
        result = self.invoke('--config', self.write_config(n_paths=4000), '--format', 'csv', '-o', str(out),
                             'benchmark', '--maturities', '0.1', '--spots', '90,110')
        self.assertEqual(result.exit_code, 0, result.output)
        lines = out.read_text().splitlines()
        self.assertTrue(lines[0].startswith("T,S,lsm_price,lsm_stderr,semi_analytic_price,oracle_price,abs_diff"))
        self.assertEqual(len(lines), 3)

    def test_benchmark_empty_grid(self):
        """An empty grid gives a header-only table"""
        out = self.root / "bench.csv"
        result = self.invoke('--config', self.write_config(), '--format', 'csv', '-o', str(out),
                             'benchmark', '--maturities', '', '--spots', '100')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(out.read_text().splitlines(),
                         ["T,S,lsm_price,lsm_stderr,semi_analytic_price,oracle_price,abs_diff"])

    def test_benchmark_bad_grid(self):
        result = self.invoke('--config', self.write_config(), 'benchmark', '--spots', 'ninety')
        self.assertEqual(result.exit_code, 2)

    def test_benchmark_json(self):
        out = self.root / "bench.json"
        result = self.invoke('--config', self.write_config(n_paths=4000), '-o', str(out),
                             'benchmark', '--maturities', '0.1', '--spots', '100')
        self.assertEqual(result.exit_code, 0, result.output)
        payload = json.loads(out.read_text())
        self.assertEqual(len(payload["rows"]), 1)
        self.assertIsInstance(payload["warnings"], list)

    def test_simulate(self):
        out = self.root / "paths.csv"
        result = self.invoke('--config', self.write_config(n_paths=10), '-o', str(out), 'simulate')
        self.assertEqual(result.exit_code, 0, result.output)
        lines = out.read_text().splitlines()
        self.assertEqual(lines[0], "path,step,time,S,V")
        self.assertEqual(len(lines), 1 + 10 * 11)

    def test_simulate_too_large(self):
        result = self.invoke('--config', self.write_config(n_paths=100), 'simulate', '--max-cells', '50')
        self.assertEqual(result.exit_code, 2)


if __name__ == '__main__':
    unittest.main()
