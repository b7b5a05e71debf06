"""The main entry point to the traceprompt package.

Annotator
    Annotates episode directories into a prompt dataset

setupLogging(verbose)
    Sends log records to traceprompt.log

main()
    Command-line entry point
"""
import logging
import sys
from pathlib import Path
from typing import (
    Iterable,
    List,
    Optional,
    Tuple,
    TypedDict,
)

from tqdm import tqdm

from traceprompt import builtin
from traceprompt.actions import BinTable
from traceprompt.annotate import (
    AnnotatedEpisode,
    GridTracker,
    annotateEpisode,
    applyDropout,
    episodeDropoutSeed,
)
from traceprompt.core import Episode, PipelineConfig
from traceprompt.promptio import (
    PathLike,
    loadDataset,
    loadEpisode,
    writeEpisodeOutput,
    writeManifest,
)
from traceprompt.tracker import trackGrid

__version__ = '0.1.0'
VERSION = f"traceprompt {__version__}"
LOGFILE = 'traceprompt.log'

logger = logging.getLogger('traceprompt')


class Result(TypedDict):
    """The outcome of annotating one episode directory"""
    episodeId: str  # directory name, or the id from episode.json
    annotated: Optional[AnnotatedEpisode]  # None if the episode failed
    error: Optional[builtin.TraceError]  # Error raised while annotating


class DatasetResult(TypedDict):
    """The outcome of annotating a dataset directory"""
    manifest: dict
    results: List[Result]


def setupLogging(verbose: bool = False, filename: str = LOGFILE) -> None:
    """Log records go to filename; verbose also mirrors INFO to stderr."""
    logging.basicConfig(
        filename=filename,
        filemode='w',
        format='%(name)s - %(levelname)s - %(message)s',
        level=logging.DEBUG,
    )
    if verbose:
        console = logging.StreamHandler(sys.stderr)
        console.setLevel(logging.INFO)
        console.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
        logging.getLogger().addHandler(console)


def logException(msg: str = "Unexpected error has occurred") -> None:
    """Logs an unexpected (Python) exception with its traceback.
    If logException is invoked, traceprompt has hit an error it should
    not have.
    """
    logger.exception(msg)
    print("traceprompt ERROR: " + msg, file=sys.stderr)
    print(f"The details of this error have been logged in {LOGFILE}.",
          file=sys.stderr)


def report(err: builtin.TraceError) -> None:
    print(f"{type(err).__name__}: {err.report()}", file=sys.stderr)


def exitCode(err: builtin.TraceError) -> int:
    """2 for I/O failures, 1 for everything else."""
    if isinstance(err, builtin.DataError):
        return builtin.EXIT_IO
    return builtin.EXIT_VALIDATION


class Annotator:
    """Batch visual-trace annotation.

    Annotator runs each episode through the annotation pipeline:
    1. Loading
       Frames and metadata are read and validated.
    2. Tracking
       Each 2N-frame segment is densely tracked once.
    3. Prompting
       Every timestep gets an active trace sample and overlay, then trace
       dropout is drawn from the episode's own seed.
    4. Writing
       Images, traces and prompt records go to the output directory;
       the manifest is written last.
    """

    def __init__(self, config: PipelineConfig = PipelineConfig(),
                 gridTracker: GridTracker = trackGrid) -> None:
        self.config = config
        self.gridTracker = gridTracker

    def annotate(self, episode: Episode) -> AnnotatedEpisode:
        config = self.config
        steps = annotateEpisode(
            episode, config.trace, config.tracker, config.style,
            gridTracker=self.gridTracker, threads=config.threads,
        )
        steps = applyDropout(steps, config.trace.dropoutProb,
                             episodeDropoutSeed(config.trace, episode))
        return AnnotatedEpisode(episode, tuple(steps))

    def runEpisode(self, path: PathLike) -> Result:
        """Loads and annotates the episode directory at path.
        Failures are returned in the result, never raised.
        """
        result: Result = {
            'episodeId': Path(path).name,
            'annotated': None,
            'error': None,
        }
        try:
            episode = loadEpisode(path)
            result['episodeId'] = episode.episodeId
            result['annotated'] = self.annotate(episode)
        except builtin.TraceError as err:
            logger.warning("Episode %s failed: %s", result['episodeId'], err.report())
            result['error'] = err
        except Exception:
            logException(f"Unexpected error in episode {result['episodeId']}")
            result['error'] = builtin.TraceError("unexpected error",
                                                 context=result['episodeId'])
        return result

    def runDataset(self, data: PathLike, out: PathLike,
                   bins: Optional[BinTable] = None,
                   progress: bool = True) -> DatasetResult:
        """Annotates every episode under data into out, one episode at a
        time. Episodes that fail are listed in the manifest and skipped.
        """
        dirs: Iterable[Path] = loadDataset(data)
        if progress:
            dirs = tqdm(dirs, desc="Annotating episodes")
        entries = []
        failed: List[Tuple[str, str]] = []
        results = []
        for path in dirs:
            result = self.runEpisode(path)
            if result['annotated'] is not None:
                try:
                    entries.append(writeEpisodeOutput(
                        result['annotated'], Path(out), self.config, bins))
                except builtin.TraceError as err:
                    result['error'] = err
            if result['error'] is not None:
                failed.append((result['episodeId'], result['error'].report()))
            # Output is on disk; only the outcome is kept
            result['annotated'] = None
            results.append(result)
        manifest = writeManifest(out, self.config, entries, failed)
        return {'manifest': manifest, 'results': results}


def main(argv: Optional[List[str]] = None) -> int:
    """This is the entry point which shell scripts should invoke.

    Returns the exit code: 0 on success, 1 on validation failure and
    2 on I/O failure.
    """
    from traceprompt import commands

    parser = commands.buildParser()
    args = parser.parse_args(argv)
    setupLogging(verbose=args.verbose)
    try:
        code = args.handler(args)
    except builtin.TraceError as err:
        report(err)
        code = exitCode(err)
    except Exception:
        logException()
        code = builtin.EXIT_VALIDATION
    return code


def run() -> None:
    sys.exit(main())
