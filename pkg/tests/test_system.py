import unittest

from traceprompt import system


class SplitMix64TestCase(unittest.TestCase):
    def test_reference_sequence(self):
        rng = system.SplitMix64(0)
        self.assertEqual(rng.next(), 0xE220A8397B1DCDAF)
        self.assertEqual(rng.next(), 0x6E789E6AA1B965F4)
        self.assertEqual(rng.next(), 0x06C45D188009454F)

    def test_below(self):
        rng = system.SplitMix64(42)
        draws = [rng.below(7) for _ in range(7000)]
        self.assertTrue(all(0 <= d < 7 for d in draws))
        for value in range(7):
            self.assertAlmostEqual(draws.count(value) / 7000, 1 / 7, delta=0.02)
        with self.assertRaises(ValueError):
            rng.below(0)

    def test_random(self):
        rng = system.SplitMix64(3)
        values = [rng.random() for _ in range(10000)]
        self.assertTrue(all(0.0 <= v < 1.0 for v in values))
        self.assertAlmostEqual(sum(values) / len(values), 0.5, delta=0.02)


class SeedTestCase(unittest.TestCase):
    def test_derive_seed(self):
        self.assertEqual(system.deriveSeed(0, 1, 2), system.deriveSeed(0, 1, 2))
        self.assertNotEqual(system.deriveSeed(0, 1, 2), system.deriveSeed(0, 2, 1))
        self.assertNotEqual(system.deriveSeed(0, 1), system.deriveSeed(1, 1))
        self.assertLess(system.deriveSeed(2 ** 64 - 1, 5), 2 ** 64)

    def test_name_hash(self):
        self.assertEqual(system.nameHash('episode_7'), system.nameHash('episode_7'))
        self.assertNotEqual(system.nameHash('episode_7'), system.nameHash('episode_8'))
        self.assertLess(system.nameHash('x'), 2 ** 64)


if __name__ == '__main__':
    unittest.main()
