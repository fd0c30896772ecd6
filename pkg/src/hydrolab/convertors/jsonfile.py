import orjson

from hydrolab.BaseObject import BaseObject, _plain
from hydrolab.convertors import BaseConvertor

OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2


class JSON(BaseConvertor):
    """Value objects and summaries as sorted-key JSON.

    Loading returns plain data; pass ``cls`` to rebuild a value object
    through its ``from_dict``.
    """

    suffix = ".json"

    def _load(self, cls=None, **kwargs):
        with open(self.filename, "rb") as f:
            data = orjson.loads(f.read())
        if cls is not None:
            return cls.from_dict(data, _copy=False)
        return data

    def _save(self, **kwargs):
        with open(self.filename, "wb") as f:
            if isinstance(self.obj, BaseObject):
                self.obj.write(f)
            else:
                f.write(orjson.dumps(_plain(self.obj), option=OPTIONS))
                f.write(b"\n")
        return self.filename
