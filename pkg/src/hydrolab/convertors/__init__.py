import logging

logger = logging.getLogger(__name__)


class BaseConvertor:
    filename: str
    scratch: dict

    suffix = ".XXX"

    def __init__(self):
        self.logger = logging.getLogger(self.__class__.__name__)

    @classmethod
    def can_load(convertor_cls, other, **kwargs):
        return str(other.filename).endswith(convertor_cls.suffix)

    @classmethod
    def can_save(convertor_cls, other, **kwargs):
        return str(other.filename).endswith(convertor_cls.suffix)

    @classmethod
    def load(convertor_cls, convertor, **kwargs):
        self = convertor_cls()
        self.filename = convertor.filename
        self.scratch = convertor.scratch
        return self._load(**kwargs)

    @classmethod
    def save(convertor_cls, obj, convertor, **kwargs):
        self = convertor_cls()
        self.obj = obj
        self.filename = convertor.filename
        self.scratch = convertor.scratch
        return self._save(**kwargs)

    def _load(self, **kwargs):
        raise NotImplementedError

    def _save(self, **kwargs):
        raise NotImplementedError


def _convertors():
    from hydrolab.convertors.csvfile import CSV
    from hydrolab.convertors.jsonfile import JSON

    return [CSV, JSON]


class Convert:
    """Pick a convertor for ``filename`` by its suffix.

    ``.csv`` files hold tables (measures, trajectories, fields, sweeps) and
    ``.json`` files hold value objects and summaries.
    """

    def __init__(self, filename):
        self.filename = str(filename)
        self.scratch = {}

    def load_convertor(self, **kwargs):
        for c in _convertors():
            if c.can_load(self, **kwargs):
                return c
        return None

    def save_convertor(self, **kwargs):
        for c in _convertors():
            if c.can_save(self, **kwargs):
                return c
        return None

    def load(self, **kwargs):
        c = self.load_convertor(**kwargs)
        if not c:
            logger.error("Could not find a convertor from %s", self.filename)
            raise NotImplementedError(f"no convertor reads {self.filename}")
        return c.load(self, **kwargs)

    def save(self, obj, **kwargs):
        c = self.save_convertor(**kwargs)
        if not c:
            logger.error("Could not find a convertor to %s", self.filename)
            raise NotImplementedError(f"no convertor writes {self.filename}")
        return c.save(obj, self, **kwargs)
