"""
Replicate Pool Module

Runs simulation replicates on a pool of worker processes. Requests go out on
one queue and responses come back on another; results are returned in
request order so tables do not depend on the number of workers.
"""

import logging
import multiprocessing as mp
import queue
import time
from typing import Optional

import psutil

from cpu_core.worker import ReplicateWorker
from .constants import WORKER_RESPONSE_TIMEOUT, WORKER_JOIN_TIMEOUT
from .exceptions import WorkerCrashError, WorkerTimeoutError
from .types import ReplicateRequest, ReplicateResponse


def available_cpus() -> int:
    """Processors this process may run on."""
    try:
        return max(1, len(psutil.Process().cpu_affinity()))
    except (AttributeError, NotImplementedError, psutil.Error):
        return psutil.cpu_count() or 1


class ReplicatePool:
    """
    Pool of ReplicateWorker processes.

    With jobs <= 1 every request is served in the calling process.

    Example:
        >>> responses = ReplicatePool(jobs=4).run(requests)
    """

    def __init__(
        self,
        jobs: Optional[int] = None,
        log_file: Optional[str] = None,
        timeout: float = WORKER_RESPONSE_TIMEOUT
    ) -> None:
        self.jobs = available_cpus() if jobs is None else max(1, int(jobs))
        self.log_file = log_file
        self.timeout = timeout
        self.workers: list[ReplicateWorker] = []

    def run(self, requests: list[ReplicateRequest]) -> list[ReplicateResponse]:
        """
        Serve every request and return the responses sorted by request id.

        Raises:
            WorkerCrashError: If a worker dies before all responses arrive
            WorkerTimeoutError: If no response arrives within the timeout
        """
        if self.jobs <= 1 or len(requests) <= 1:
            return self._run_inline(requests)
        return self._run_pool(requests)

    def _run_inline(self, requests: list[ReplicateRequest]) -> list[ReplicateResponse]:
        from .simulate import handle_replicate_request

        responses = []
        for req in requests:
            start_time = time.time()
            response = handle_replicate_request(req)
            response['duration'] = time.time() - start_time
            responses.append(response)
            logging.debug(f"Replicate {req['replicate']} done in {response['duration']:.2f}s")
        return responses

    def _run_pool(self, requests: list[ReplicateRequest]) -> list[ReplicateResponse]:
        request_queue = mp.Queue()
        response_queue = mp.Queue()
        n_workers = min(self.jobs, len(requests))
        root_level = logging.getLogger().level

        logging.info(f"Starting {n_workers} replicate workers...")
        for i in range(n_workers):
            self.workers.append(ReplicateWorker(i, request_queue, response_queue, self.log_file, root_level))

        try:
            for worker in self.workers:
                worker.start()
            for req in requests:
                request_queue.put(req)
            responses = self._collect(response_queue, len(requests))
        finally:
            self._stop(request_queue)

        responses.sort(key=lambda r: r['request_id'])
        return responses

    def _collect(self, response_queue, expected: int) -> list[ReplicateResponse]:
        responses: list[ReplicateResponse] = []
        last_response = time.time()
        while len(responses) < expected:
            try:
                resp = response_queue.get(timeout=1.0)
            except queue.Empty:
                for worker in self.workers:
                    if not worker.is_alive() and worker.exitcode not in (0, None):
                        raise WorkerCrashError(worker.worker_id, f"exited with code {worker.exitcode}")
                if not any(worker.is_alive() for worker in self.workers):
                    raise WorkerCrashError(self.workers[-1].worker_id, "all workers exited early")
                if time.time() - last_response > self.timeout:
                    raise WorkerTimeoutError(self.timeout)
                continue

            last_response = time.time()
            if resp.get('error'):
                logging.warning(f"Replicate {resp['replicate']} failed: {resp['error']}")
            responses.append(resp)
            logging.info(f"Replicate {resp['replicate']} done ({len(responses)}/{expected})")
        return responses

    def _stop(self, request_queue) -> None:
        """Stop all workers gracefully."""
        for _ in self.workers:
            try:
                request_queue.put({'type': 'shutdown'}, timeout=1)
            except queue.Full:
                pass

        for p in self.workers:
            if p.is_alive():
                p.join(timeout=WORKER_JOIN_TIMEOUT)

        for p in self.workers:
            if p.is_alive():
                p.terminate()
                p.join(timeout=0.1)

        self.workers = []
        logging.debug("Replicate workers stopped")
