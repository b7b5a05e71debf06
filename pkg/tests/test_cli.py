import json
import tempfile
import unittest
from pathlib import Path

from traceprompt import builtin, main, promptio
from traceprompt.actions import loadBins
from tests import capture, translatingEpisode

# 64px frames hold three pyramid levels with the 11px window
LEVELS = ['--pyramid-levels', '2']
SMALL = ['--k', '4', '--m', '3', '--n', '3', '--quiet', *LEVELS]


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.data = self.root / 'data'
        for i, name in enumerate(('ep0', 'ep1')):
            promptio.writeEpisode(translatingEpisode(8, (2, 1), episodeId=name, seed=i),
                                  self.data / name)

    def tearDown(self):
        self.tmp.cleanup()

    def run_main(self, *argv):
        with capture() as out, capture('stderr') as err:
            code = main([str(arg) for arg in argv])
        return code, out.getvalue(), err.getvalue()

    def manifest(self, out):
        return json.loads((out / builtin.MANIFEST).read_text())


class AnnotateCommandTestCase(CliTestCase):
    def test_success(self):
        out = self.root / 'out'
        code, stdout, _ = self.run_main('annotate', '--data', self.data, '--out', out, *SMALL)
        self.assertEqual(code, builtin.EXIT_OK)
        self.assertIn("Annotated 2 of 2 episodes", stdout)
        manifest = self.manifest(out)
        self.assertEqual([e['id'] for e in manifest['episodes']], ['ep0', 'ep1'])
        self.assertEqual(manifest['config']['trace']['gridSize'], 4)
        records = promptio.readPromptRecords(out / 'ep1' / builtin.PROMPTS_DOC)
        self.assertEqual(len(records), 8)

    def test_config_file_overrides_flags(self):
        config = self.root / 'config.json'
        config.write_text(json.dumps({'k': 5, 'seed': 3, 'prompt_mode': 'text'}))
        out = self.root / 'out'
        code, _, _ = self.run_main('annotate', '--data', self.data, '--out', out,
                                   *SMALL, '--config', config)
        self.assertEqual(code, builtin.EXIT_OK)
        trace = self.manifest(out)['config']['trace']
        self.assertEqual((trace['gridSize'], trace['seed']), (5, 3))
        self.assertEqual(self.manifest(out)['config']['promptMode'], 'text')

    def test_unknown_config_key(self):
        config = self.root / 'config.json'
        config.write_text(json.dumps({'grid': 5}))
        code, _, stderr = self.run_main('annotate', '--data', self.data,
                                        '--out', self.root / 'out', '--config', config)
        self.assertEqual(code, builtin.EXIT_VALIDATION)
        self.assertIn("ConfigError", stderr)

    def test_invalid_config_value(self):
        code, _, stderr = self.run_main('annotate', '--data', self.data,
                                        '--out', self.root / 'out', '--k', '2', '--m', '5')
        self.assertEqual(code, builtin.EXIT_VALIDATION)
        self.assertIn("exceeds", stderr)

    def test_frames_too_small_for_pyramid(self):
        code, stdout, _ = self.run_main('annotate', '--data', self.data,
                                        '--out', self.root / 'out',
                                        '--k', '4', '--m', '3', '--n', '3', '--quiet')
        self.assertEqual(code, builtin.EXIT_VALIDATION)
        self.assertIn("ConfigError", stdout)
        self.assertIn("pyramid level 3", stdout)

    def test_failed_episode_listed(self):
        meta = self.data / 'ep1' / builtin.EPISODE_META
        data = json.loads(meta.read_text())
        data['actions'] = data['actions'][:-1]
        meta.write_text(json.dumps(data))
        out = self.root / 'out'
        code, stdout, _ = self.run_main('annotate', '--data', self.data, '--out', out, *SMALL)
        self.assertEqual(code, builtin.EXIT_VALIDATION)
        self.assertIn("Annotated 1 of 2 episodes", stdout)
        manifest = self.manifest(out)
        self.assertEqual([e['id'] for e in manifest['episodes']], ['ep0'])
        self.assertEqual([f['id'] for f in manifest['failed']], ['ep1'])

    def test_io_failure(self):
        (self.data / 'ep0' / 'frame_00003.png').unlink()
        code, _, _ = self.run_main('annotate', '--data', self.data,
                                   '--out', self.root / 'out', *SMALL)
        self.assertEqual(code, builtin.EXIT_IO)

    def test_missing_dataset(self):
        code, _, stderr = self.run_main('annotate', '--data', self.root / 'absent',
                                        '--out', self.root / 'out', *SMALL)
        self.assertEqual(code, builtin.EXIT_IO)
        self.assertIn("DataError", stderr)


class FitActionsCommandTestCase(CliTestCase):
    def test_fit_then_annotate(self):
        bins = self.root / 'bins.json'
        code, _, _ = self.run_main('fit-actions', '--data', self.data, '--out', bins,
                                   '--bins', 8, '--quiet')
        self.assertEqual(code, builtin.EXIT_OK)
        table = loadBins(bins.read_text())
        self.assertEqual((table.nBins, table.dims), (8, 7))

        out = self.root / 'out'
        code, _, _ = self.run_main('annotate', '--data', self.data, '--out', out,
                                   '--bins', bins, *SMALL)
        self.assertEqual(code, builtin.EXIT_OK)
        records = promptio.readPromptRecords(out / 'ep0' / builtin.PROMPTS_DOC)
        for record in records:
            self.assertEqual(len(record.actionTokens), 7)
            self.assertTrue(all(0 <= token < 8 for token in record.actionTokens))

    def test_too_few_samples(self):
        code, _, stderr = self.run_main('fit-actions', '--data', self.data,
                                        '--out', self.root / 'bins.json', '--quiet')
        self.assertEqual(code, builtin.EXIT_VALIDATION)
        self.assertIn("insufficient samples", stderr)


class RenderCommandTestCase(CliTestCase):
    def test_render(self):
        out = self.root / 'overlay.png'
        code, stdout, _ = self.run_main('render', '--episode', self.data / 'ep0',
                                        '--t', 5, '--out', out, *SMALL)
        self.assertEqual(code, builtin.EXIT_OK)
        self.assertIn("[2, 5]", stdout)
        frame = promptio.readPng(out, 5)
        self.assertEqual(frame.size, (64, 64))

    def test_warmup_writes_original(self):
        out = self.root / 'original.png'
        code, _, _ = self.run_main('render', '--episode', self.data / 'ep0',
                                   '--t', 1, '--out', out, *SMALL)
        self.assertEqual(code, builtin.EXIT_OK)
        episode = promptio.loadEpisode(self.data / 'ep0')
        self.assertTrue(promptio.readPng(out, 1).sameAs(episode.frames[1]))


class StreamCommandTestCase(CliTestCase):
    def test_stream(self):
        out = self.root / 'stream'
        code, stdout, _ = self.run_main('stream', '--frames', self.data / 'ep0',
                                        '--out', out, *SMALL)
        self.assertEqual(code, builtin.EXIT_OK)
        self.assertIn("Streamed 8 frames", stdout)
        lines = (out / builtin.STREAM_TRACES_DOC).read_text().splitlines()
        self.assertEqual([json.loads(line)['timestep'] for line in lines], list(range(8)))
        self.assertEqual(self.manifest(out)['steps'], 8)


class VerifyCommandTestCase(CliTestCase):
    def test_verify(self):
        code, stdout, _ = self.run_main('verify', '--episode', self.data / 'ep0',
                                        '--grid', 4, '--search-radius', 4, *LEVELS)
        self.assertEqual(code, builtin.EXIT_OK)
        self.assertIn("max deviation", stdout)

    def test_tolerance(self):
        code, stdout, _ = self.run_main('verify', '--episode', self.data / 'ep0',
                                        '--grid', 4, '--search-radius', 4,
                                        '--tolerance', -1, *LEVELS)
        self.assertEqual(code, builtin.EXIT_VALIDATION)
        self.assertIn("FAIL", stdout)


class BenchmarkCommandTestCase(CliTestCase):
    def test_small_benchmark(self):
        code, stdout, _ = self.run_main('benchmark', '--size', 64, '--k', 4,
                                        '--repeats', 3, '--dense-repeats', 1, *LEVELS)
        self.assertEqual(code, builtin.EXIT_OK)
        self.assertIn("sparse step", stdout)
        self.assertIn("dense track", stdout)


class ParserTestCase(unittest.TestCase):
    def test_version(self):
        with capture():
            with self.assertRaises(SystemExit) as caught:
                main(['--version'])
        self.assertEqual(caught.exception.code, 0)

    def test_command_required(self):
        with capture('stderr'):
            with self.assertRaises(SystemExit):
                main([])


if __name__ == '__main__':
    unittest.main()
