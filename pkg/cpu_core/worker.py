import multiprocessing as mp
import time
import logging
import queue
import traceback
import sys
from pathlib import Path
from typing import Optional

# Add parent directory to path to find modules
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Numerical modules are imported lazily in run() so spawned children start light


class ReplicateWorker(mp.Process):
    """
    Worker process serving simulation replicates.

    Reads ReplicateRequest dicts from request_queue and answers each with a
    ReplicateResponse on response_queue until a shutdown request arrives.
    """

    def __init__(
        self,
        worker_id: int,
        request_queue,
        response_queue,
        log_file: Optional[str] = None,
        log_level: int = logging.INFO
    ):
        super().__init__(name=f"replicate-worker-{worker_id}", daemon=True)
        self.worker_id = worker_id
        self.request_queue = request_queue
        self.response_queue = response_queue
        self.log_file = log_file
        self.log_level = log_level
        self.logger = None

    def run(self):
        # Setup logging in this process
        from core.logger import setup_logging, StreamToLogger
        setup_logging(
            log_file=self.log_file,
            level=self.log_level,
            enable_console_logging=False
        )
        self.logger = logging.getLogger(f'replicate_worker_{self.worker_id}')

        # Redirect stdout/stderr to logger to prevent console leakage
        sys.stdout = StreamToLogger(self.logger, logging.INFO)
        sys.stderr = StreamToLogger(self.logger, logging.ERROR)

        self.logger.debug(f"Replicate worker {self.worker_id} started")
        try:
            from core.simulate import handle_replicate_request
            self._main_loop(handle_replicate_request)
        except Exception as e:
            self.logger.critical(f"Replicate worker crashed: {e}")
            traceback.print_exc()
        finally:
            self.logger.debug(f"Replicate worker {self.worker_id} shutting down")

    def _main_loop(self, handler):
        while True:
            try:
                req = self.request_queue.get(timeout=1.0)
            except queue.Empty:
                continue

            if req.get('type') == 'shutdown':
                break

            if req.get('type') == 'replicate':
                self._execute(req, handler)

    def _execute(self, req, handler):
        start_time = time.time()
        try:
            response = handler(req)
        except Exception as e:
            # Anything the fitters do not classify fails the whole replicate
            self.logger.error(f"Replicate {req['replicate']} failed on worker {self.worker_id}: {e}")
            traceback.print_exc()
            response = {
                'request_id': req['id'],
                'replicate': req['replicate'],
                'mse': {method: None for method in req['methods']},
                'errors': {method: str(e) for method in req['methods']},
                'error': str(e),
            }
        response['duration'] = time.time() - start_time
        self.response_queue.put(response)
