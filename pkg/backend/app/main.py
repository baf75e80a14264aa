from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app import __version__
from app.core.config import settings
from app.core.errors import OrbitLabError
from app.core.log_setup import setup_logging
from app.routers import experiments

# 初始化日志
setup_logging()


def create_app() -> FastAPI:
    app = FastAPI(title=settings.app_name, version=__version__, debug=settings.debug)

    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.cors_origins,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(OrbitLabError)
    async def orbitlab_error_handler(request: Request, exc: OrbitLabError) -> JSONResponse:
        # 数值前置条件失败统一返回 422
        return JSONResponse(status_code=422, content=exc.to_dict())

    app.include_router(experiments.router)
    return app


app = create_app()
