from functools import lru_cache
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as package_version
from logging import Logger

from git import Repo
from git.exc import InvalidGitRepositoryError, NoSuchPathError

from clickstats.logging import getLogger

logger: Logger = getLogger("clickstats.version")


@lru_cache
def get_version() -> str:
    if version := _get_git_version():
        logger.debug(f"Version {version} (from git)")
        return version
    try:
        version = package_version("clickstats")
        logger.debug(f"Version {version} (from package metadata)")
        return version
    except PackageNotFoundError:
        logger.warning("No version found")
        return "0.1.0"


def _get_git_version() -> str | None:
    try:
        repo = Repo(search_parent_directories=True)
        current_commit_hash: str = repo.commit("HEAD").hexsha
    except (InvalidGitRepositoryError, NoSuchPathError, ValueError):
        return None

    # A tag on the current commit wins over the hash stub
    for tag in repo.tags:
        if tag.commit.hexsha == current_commit_hash:
            return tag.name
    return current_commit_hash[:8]
